#pragma once

#include <filesystem>
#include <string>

#include "sclm/model.hpp"

namespace sclm {

/// Binary checkpoint layout (all integers little-endian):
///
///   "SCLM" | u32 version | u32 header_len | header (UTF-8 JSON) | payload
///
/// The header holds `config`, `provenance` and `tensors`, an ordered list of
/// `{name, shape, offset, nbytes}` with offsets relative to the payload start.
/// The payload is the concatenation of raw little-endian float32 tensors.
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[4] = {'S', 'C', 'L', 'M'};

class CheckpointError : public DataError {
 public:
  enum class Kind { io, bad_magic, corrupt_header, version_mismatch, truncated, size_mismatch, schema_mismatch };

  CheckpointError(Kind kind, const std::string& message) : DataError(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

void save_checkpoint(const TransformerModel& model, const std::filesystem::path& path);
TransformerModel load_checkpoint(const std::filesystem::path& path);

/// In-memory variants used by the file functions.
std::string encode_checkpoint(const TransformerModel& model);
TransformerModel decode_checkpoint(const std::string& bytes);

}  // namespace sclm

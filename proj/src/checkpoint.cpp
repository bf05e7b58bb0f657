#include "sclm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sclm {

namespace {

using Kind = CheckpointError::Kind;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const std::string& in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + static_cast<std::size_t>(i)]))
         << (8 * i);
  }
  return v;
}

void put_floats(std::string& out, const Matrix<float>& m) {
  for (Index i = 0; i < m.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(m.data()[i]);
    put_u32(out, bits);
  }
}

}  // namespace

std::string encode_checkpoint(const TransformerModel& model) {
  nlohmann::json header;
  header["config"] = model.config;
  header["provenance"] = model.provenance;
  header["tensors"] = nlohmann::json::array();
  std::string payload;
  for (const auto& p : model.parameters()) {
    const auto offset = payload.size();
    put_floats(payload, p.tensor.value());
    header["tensors"].push_back({{"name", p.name},
                                 {"shape", p.tensor.shape()},
                                 {"offset", offset},
                                 {"nbytes", payload.size() - offset}});
  }
  const std::string text = header.dump();
  std::string out(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  out += payload;
  return out;
}

TransformerModel decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 12) throw CheckpointError(Kind::truncated, "checkpoint: file shorter than fixed header");
  if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw CheckpointError(Kind::bad_magic, "checkpoint: missing SCLM magic bytes");
  }
  const auto version = get_u32(bytes, 4);
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::version_mismatch, "checkpoint: version " + std::to_string(version) +
                                                      " unsupported (expected " +
                                                      std::to_string(kCheckpointVersion) + ")");
  }
  const std::size_t header_len = get_u32(bytes, 8);
  if (bytes.size() < 12 + header_len) {
    throw CheckpointError(Kind::truncated, "checkpoint: header truncated");
  }
  nlohmann::json header;
  ModelConfig config;
  Provenance provenance;
  try {
    header = nlohmann::json::parse(bytes.substr(12, header_len));
    config = header.at("config").get<ModelConfig>();
    provenance = header.at("provenance").get<Provenance>();
    config.validate();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(Kind::corrupt_header, std::string("checkpoint: corrupt header: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(Kind::corrupt_header, std::string("checkpoint: corrupt header: ") + e.what());
  }

  // Shapes come from the declared config; the tensor table must agree.
  auto model = init_model<float>(config);
  model.provenance = std::move(provenance);
  const auto params = model.parameters();
  const auto& table = header.at("tensors");
  if (!table.is_array() || table.size() != params.size()) {
    throw CheckpointError(Kind::schema_mismatch, "checkpoint: tensor table has " +
                                                     std::to_string(table.is_array() ? table.size() : 0) +
                                                     " entries, config implies " +
                                                     std::to_string(params.size()));
  }
  const std::size_t payload_start = 12 + header_len;
  std::size_t expected_offset = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::string name;
    Shape shape;
    std::size_t offset = 0;
    std::size_t nbytes = 0;
    try {
      name = table[i].at("name").get<std::string>();
      shape = table[i].at("shape").get<Shape>();
      offset = table[i].at("offset").get<std::size_t>();
      nbytes = table[i].at("nbytes").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw CheckpointError(Kind::corrupt_header,
                            "checkpoint: tensor entry " + std::to_string(i) + ": " + e.what());
    }
    auto tensor = params[i].tensor;
    if (name != params[i].name || shape != tensor.shape()) {
      throw CheckpointError(Kind::schema_mismatch, "checkpoint: entry " + std::to_string(i) + " is '" +
                                                       name + "' " + shape_string(shape) + ", expected '" +
                                                       params[i].name + "' " +
                                                       shape_string(tensor.shape()));
    }
    const auto actual = static_cast<std::size_t>(tensor.size()) * sizeof(float);
    if (nbytes != actual) {
      throw CheckpointError(Kind::size_mismatch, "checkpoint: tensor '" + name + "' declares " +
                                                     std::to_string(nbytes) + " bytes but its shape holds " +
                                                     std::to_string(actual));
    }
    if (offset != expected_offset) {
      throw CheckpointError(Kind::corrupt_header, "checkpoint: tensor '" + name + "' offset " +
                                                      std::to_string(offset) + " out of order");
    }
    if (bytes.size() < payload_start + offset + nbytes) {
      throw CheckpointError(Kind::truncated, "checkpoint: payload truncated inside tensor '" + name + "'");
    }
    auto& m = tensor.value();
    for (Index k = 0; k < m.size(); ++k) {
      const auto bits = get_u32(bytes, payload_start + offset + static_cast<std::size_t>(k) * 4);
      m.data()[k] = std::bit_cast<float>(bits);
    }
    expected_offset += nbytes;
  }
  if (bytes.size() != payload_start + expected_offset) {
    throw CheckpointError(Kind::size_mismatch, "checkpoint: " +
                                                   std::to_string(bytes.size() - payload_start - expected_offset) +
                                                   " trailing bytes after tensor payload");
  }
  return model;
}

void save_checkpoint(const TransformerModel& model, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(model);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(Kind::io, "checkpoint: cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(Kind::io, "checkpoint: write failed for " + path.string());
}

TransformerModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(Kind::io, "checkpoint: cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return decode_checkpoint(ss.str());
  } catch (const CheckpointError& e) {
    throw CheckpointError(e.kind(), std::string(e.what()) + " (" + path.string() + ")");
  }
}

}  // namespace sclm

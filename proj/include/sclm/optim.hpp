#pragma once

#include <string>
#include <vector>

#include "sclm/tensor.hpp"

namespace sclm {

enum class ScheduleKind { constant, cosine };

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& name);

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::constant;
  double base_lr = 1e-3;
  long warmup_steps = 0;
  long total_steps = 1;
  double min_lr = 1e-4;  // 0.1 x base_lr unless configured

  /// Throws ConfigError when the invariants do not hold.
  void validate() const;
};

/// Learning rate at optimizer step `step` (0 ... total_steps).
///
/// Constant schedules return `base_lr`. Cosine schedules ramp linearly from 0
/// to `base_lr` over the warmup, then follow a half cosine down to `min_lr`.
double lr_at(long step, const ScheduleSpec& spec);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

template <typename Scalar>
struct NamedTensor {
  std::string name;
  BasicTensor<Scalar> tensor;
};

template <typename Scalar>
using ParameterList = std::vector<NamedTensor<Scalar>>;

/// First/second moments for each parameter, zero-initialized.
template <typename Scalar>
class AdamState {
 public:
  AdamState() = default;
  AdamState(const ParameterList<Scalar>& params, AdamConfig config);

  const AdamConfig& config() const { return config_; }
  long step_count() const { return step_count_; }
  const std::vector<Matrix<Scalar>>& first_moments() const { return m_; }
  const std::vector<Matrix<Scalar>>& second_moments() const { return v_; }

  /// One AdamW update. Parameters without a gradient are treated as having a
  /// zero gradient. Decoupled weight decay shrinks each parameter before the
  /// moment update.
  void step(const ParameterList<Scalar>& params, double lr);

 private:
  AdamConfig config_;
  long step_count_ = 0;
  std::vector<Matrix<Scalar>> m_;
  std::vector<Matrix<Scalar>> v_;
};

template <typename Scalar>
void adam_step(const ParameterList<Scalar>& params, AdamState<Scalar>& state, double lr) {
  state.step(params, lr);
}

template <typename Scalar>
void zero_grad(const ParameterList<Scalar>& params) {
  for (const auto& p : params) {
    auto t = p.tensor;
    t.zero_grad();
  }
}

}  // namespace sclm

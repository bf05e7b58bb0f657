#include "sclm/optim.hpp"

#include <cmath>
#include <numbers>

namespace sclm {

std::string to_string(ScheduleKind kind) {
  return kind == ScheduleKind::constant ? "constant" : "cosine";
}

ScheduleKind schedule_kind_from_string(const std::string& name) {
  if (name == "constant") return ScheduleKind::constant;
  if (name == "cosine") return ScheduleKind::cosine;
  throw ConfigError("unknown schedule kind '" + name + "' (expected constant or cosine)");
}

void ScheduleSpec::validate() const {
  if (!(base_lr > 0.0)) throw ConfigError("schedule: base_lr must be positive");
  if (total_steps < 1) throw ConfigError("schedule: total_steps must be at least 1");
  if (warmup_steps < 0 || warmup_steps > total_steps) {
    throw ConfigError("schedule: warmup_steps must lie in [0, total_steps]");
  }
  if (min_lr < 0.0 || min_lr > base_lr) throw ConfigError("schedule: min_lr must lie in [0, base_lr]");
}

double lr_at(long step, const ScheduleSpec& spec) {
  if (step < 0 || step > spec.total_steps) {
    throw RangeError("lr_at: step " + std::to_string(step) + " outside [0, " +
                     std::to_string(spec.total_steps) + "]");
  }
  if (spec.kind == ScheduleKind::constant) return spec.base_lr;
  if (step < spec.warmup_steps) {
    return spec.base_lr * static_cast<double>(step) / static_cast<double>(spec.warmup_steps);
  }
  const long decay = spec.total_steps - spec.warmup_steps;
  if (decay == 0) return spec.base_lr;
  const double p = static_cast<double>(step - spec.warmup_steps) / static_cast<double>(decay);
  return spec.min_lr + 0.5 * (spec.base_lr - spec.min_lr) * (1.0 + std::cos(std::numbers::pi * p));
}

template <typename Scalar>
AdamState<Scalar>::AdamState(const ParameterList<Scalar>& params, AdamConfig config)
    : config_(config) {
  if (config.weight_decay < 0.0) throw ConfigError("adam: weight_decay must be non-negative");
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params) {
    m_.push_back(Matrix<Scalar>::Zero(p.tensor.rows(), p.tensor.cols()));
    v_.push_back(Matrix<Scalar>::Zero(p.tensor.rows(), p.tensor.cols()));
  }
}

template <typename Scalar>
void AdamState<Scalar>::step(const ParameterList<Scalar>& params, double lr) {
  if (params.size() != m_.size()) {
    throw ContractError("adam: optimizer state tracks " + std::to_string(m_.size()) +
                        " parameters but " + std::to_string(params.size()) + " were given");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = params[i].tensor;
    if (t.rows() != m_[i].rows() || t.cols() != m_[i].cols()) {
      throw DimensionError("adam", "parameter '" + params[i].name + "' has shape " +
                                       shape_string(t.shape()) + " but state differs");
    }
    if (t.has_grad() && !t.grad().allFinite()) {
      throw NumericError("adam: non-finite gradient in parameter '" + params[i].name + "'");
    }
  }

  ++step_count_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const auto bc1 = static_cast<Scalar>(1.0 - std::pow(b1, static_cast<double>(step_count_)));
  const auto bc2 = static_cast<Scalar>(1.0 - std::pow(b2, static_cast<double>(step_count_)));
  const auto lr_s = static_cast<Scalar>(lr);
  const auto eps = static_cast<Scalar>(config_.eps);
  const auto decay = static_cast<Scalar>(1.0 - lr * config_.weight_decay);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto t = params[i].tensor;
    auto& value = t.value();
    if (config_.weight_decay != 0.0) value *= decay;
    if (!t.has_grad()) {
      m_[i] *= static_cast<Scalar>(b1);
      v_[i] *= static_cast<Scalar>(b2);
    } else {
      const auto& g = t.grad();
      m_[i] = static_cast<Scalar>(b1) * m_[i] + static_cast<Scalar>(1.0 - b1) * g;
      v_[i] = static_cast<Scalar>(b2) * v_[i] + static_cast<Scalar>(1.0 - b2) * g.cwiseProduct(g);
    }
    value.array() -= lr_s * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps);
  }
}

template class AdamState<float>;
template class AdamState<double>;

}  // namespace sclm

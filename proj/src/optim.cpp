#include "vc/optim.hpp"

#include <cmath>

namespace vc {

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::adam ? "adam" : "sgd";
}

OptimizerKind parse_optimizer_kind(const std::string& text) {
  if (text == "adam") return OptimizerKind::adam;
  if (text == "sgd") return OptimizerKind::sgd;
  throw std::invalid_argument("unknown optimizer '" + text + "' (expected adam or sgd)");
}

Optimizer::Optimizer(OptimizerSettings settings, std::vector<Tensor> params)
    : params_(std::move(params)) {
  if (!(settings.learning_rate > 0.0))
    throw std::invalid_argument("learning rate must be positive");
  state_.settings = settings;
  if (settings.kind == OptimizerKind::adam) {
    for (const auto& p : params_) {
      state_.first_moment.emplace_back(p.size(), 0.0);
      state_.second_moment.emplace_back(p.size(), 0.0);
    }
  }
}

void Optimizer::step() {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (!params_[i].has_grad())
      throw ContractError("optimizer step: parameter " + std::to_string(i) + " " +
                          shape_string(params_[i].shape()) + " has no gradient");

  const auto& s = state_.settings;
  ++state_.step_count;
  if (s.kind == OptimizerKind::sgd) {
    for (auto& p : params_) {
      auto d = p.mutable_data();
      auto g = p.grad();
      for (std::size_t j = 0; j < d.size(); ++j) d[j] -= s.learning_rate * g[j];
      p.zero_grad();
    }
    return;
  }

  const double t = static_cast<double>(state_.step_count);
  const double correction1 = 1.0 - std::pow(s.beta1, t);
  const double correction2 = 1.0 - std::pow(s.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    auto d = p.mutable_data();
    auto g = p.grad();
    auto& m = state_.first_moment[i];
    auto& v = state_.second_moment[i];
    for (std::size_t j = 0; j < d.size(); ++j) {
      m[j] = s.beta1 * m[j] + (1.0 - s.beta1) * g[j];
      v[j] = s.beta2 * v[j] + (1.0 - s.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      d[j] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
    }
    p.zero_grad();
  }
}

void Optimizer::restore(OptimizerState state) {
  const bool adam = state.settings.kind == OptimizerKind::adam;
  const auto expected = adam ? params_.size() : 0;
  if (state.first_moment.size() != expected || state.second_moment.size() != expected)
    throw std::invalid_argument("optimizer state has wrong number of moment buffers");
  for (std::size_t i = 0; i < expected; ++i)
    if (state.first_moment[i].size() != params_[i].size() ||
        state.second_moment[i].size() != params_[i].size())
      throw std::invalid_argument("optimizer moment buffer " + std::to_string(i) +
                                  " does not match its parameter");
  state_ = std::move(state);
}

}  // namespace vc

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vc/tensor.hpp"

namespace vc {

enum class OptimizerKind { sgd, adam };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(const std::string& text);

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moment accumulators are held per parameter, in the order the parameters
// were registered. They exist only for adam.
struct OptimizerState {
  OptimizerSettings settings;
  std::uint64_t step_count = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

class Optimizer {
public:
  Optimizer(OptimizerSettings settings, std::vector<Tensor> params);

  // Applies one update from the accumulated gradients, then zeroes them.
  // Throws ContractError when a parameter carries no gradient.
  void step();

  const OptimizerState& state() const { return state_; }
  // Restores counters and moments; shapes must match the registered params.
  void restore(OptimizerState state);
  const std::vector<Tensor>& params() const { return params_; }

private:
  OptimizerState state_;
  std::vector<Tensor> params_;
};

}  // namespace vc

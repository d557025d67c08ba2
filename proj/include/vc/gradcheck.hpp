#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "vc/tensor.hpp"

namespace vc {

struct GradCheckOptions {
  double step = 1e-5;
  // Coordinates probed per parameter; every coordinate when the parameter is smaller.
  std::size_t max_coords_per_param = 24;
  std::uint64_t seed = 7;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coords_checked = 0;
};

// Compares backward() against central differences of `loss_fn` for the given
// leaf parameters. Relative error per coordinate is
// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
GradCheckResult gradient_check(const std::function<Tensor()>& loss_fn,
                               std::vector<Tensor> params, GradCheckOptions options = {});

}  // namespace vc

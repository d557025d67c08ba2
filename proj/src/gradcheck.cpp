#include "vc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace vc {

GradCheckResult gradient_check(const std::function<Tensor()>& loss_fn,
                               std::vector<Tensor> params, GradCheckOptions options) {
  for (auto& p : params) {
    p.set_requires_grad(true);
    p.clear_grad();
  }
  loss_fn().backward();

  std::vector<std::vector<double>> analytic;
  for (auto& p : params) {
    if (p.has_grad()) analytic.emplace_back(p.grad().begin(), p.grad().end());
    else analytic.emplace_back(p.size(), 0.0);
    p.clear_grad();
  }

  std::mt19937_64 rng(options.seed);
  GradCheckResult result;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    std::vector<std::size_t> coords(p.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > options.max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_param);
    }
    for (auto c : coords) {
      auto data = p.mutable_data();
      const double original = data[c];
      data[c] = original + options.step;
      const double plus = loss_fn().item();
      data[c] = original - options.step;
      const double minus = loss_fn().item();
      data[c] = original;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = analytic[i][c];
      const double err =
          std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      result.max_relative_error = std::max(result.max_relative_error, err);
      ++result.coords_checked;
    }
  }
  return result;
}

}  // namespace vc

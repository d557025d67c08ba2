#include "vc/cqt.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "vc/random.hpp"

namespace vc {

void CqtConfig::validate() const {
  if (!(sample_rate > 0.0)) throw ConfigError("cqt: sample_rate must be positive");
  if (!(f_min > 0.0)) throw ConfigError("cqt: f_min must be positive");
  if (bins_per_octave == 0) throw ConfigError("cqt: bins_per_octave must be positive");
  if (n_bins == 0) throw ConfigError("cqt: n_bins must be positive");
  if (hop == 0) throw ConfigError("cqt: hop must be positive");
  if (!(q_scale > 0.0)) throw ConfigError("cqt: q_scale must be positive");
  if (!(gamma > 0.0)) throw ConfigError("cqt: gamma must be positive");
  const double top = center_frequency(n_bins - 1);
  if (!(top < sample_rate / 2.0))
    throw ConfigError("cqt: top bin centre " + std::to_string(top) +
                      " Hz is not below Nyquist " + std::to_string(sample_rate / 2.0) + " Hz");
}

double CqtConfig::center_frequency(std::size_t bin) const {
  // exp2 of an exact multiple of 1/B keeps octave ratios exactly 2.
  const auto octaves = static_cast<double>(bin / bins_per_octave);
  const auto rest = static_cast<double>(bin % bins_per_octave);
  return f_min * std::exp2(rest / static_cast<double>(bins_per_octave)) * std::exp2(octaves);
}

double CqtConfig::quality() const {
  return 1.0 / (std::exp2(1.0 / static_cast<double>(bins_per_octave)) - 1.0);
}

long CqtConfig::nearest_bin(double hz) const {
  return std::lround(static_cast<double>(bins_per_octave) * std::log2(hz / f_min));
}

std::size_t Filterbank::longest_window() const {
  std::size_t longest = 0;
  for (const auto& k : kernels) longest = std::max(longest, k.window_length);
  return longest;
}

Filterbank design_filterbank(const CqtConfig& config) {
  config.validate();
  Filterbank bank{config, {}};
  const double q = config.quality();
  bank.kernels.reserve(config.n_bins);
  for (std::size_t k = 0; k < config.n_bins; ++k) {
    CqtKernel kernel;
    kernel.center_frequency = config.center_frequency(k);
    kernel.window_length = static_cast<std::size_t>(
        std::ceil(config.q_scale * q * config.sample_rate / kernel.center_frequency));
    const auto n = kernel.window_length;
    std::vector<double> window(n);
    double l1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = std::sin(std::numbers::pi * (static_cast<double>(i) + 0.5) /
                                static_cast<double>(n));
      window[i] = s * s;
      l1 += window[i];
    }
    kernel.coeffs.resize(n);
    const double half = static_cast<double>(n / 2);
    for (std::size_t i = 0; i < n; ++i) {
      const double phase = 2.0 * std::numbers::pi * kernel.center_frequency *
                           (static_cast<double>(i) - half) / config.sample_rate;
      kernel.coeffs[i] = std::polar(window[i] / l1, phase);
    }
    bank.kernels.push_back(std::move(kernel));
  }
  return bank;
}

namespace {

// First sample touched by kernel `k` at frame `t`, relative to the signal start.
std::ptrdiff_t window_start(const CqtKernel& kernel, std::size_t t, std::size_t hop) {
  return static_cast<std::ptrdiff_t>(t * hop) -
         static_cast<std::ptrdiff_t>(kernel.window_length / 2);
}

ComplexGrid analyze_unchecked(std::span<const double> signal, const Filterbank& bank) {
  ComplexGrid grid;
  grid.bins = bank.kernels.size();
  grid.frames = bank.config.frames_for(signal.size());
  grid.values.assign(grid.bins * grid.frames, {});
  const auto length = static_cast<std::ptrdiff_t>(signal.size());
  for (std::size_t k = 0; k < grid.bins; ++k) {
    const auto& kernel = bank.kernels[k];
    const auto n = static_cast<std::ptrdiff_t>(kernel.window_length);
    for (std::size_t t = 0; t < grid.frames; ++t) {
      const auto start = window_start(kernel, t, bank.config.hop);
      const auto lo = std::max<std::ptrdiff_t>(0, -start);
      const auto hi = std::min<std::ptrdiff_t>(n, length - start);
      double re = 0.0, im = 0.0;
      for (auto i = lo; i < hi; ++i) {
        const double x = signal[static_cast<std::size_t>(start + i)];
        const auto& h = kernel.coeffs[static_cast<std::size_t>(i)];
        re += h.real() * x;
        im -= h.imag() * x;
      }
      grid.values[k * grid.frames + t] = {re, im};
    }
  }
  return grid;
}

double norm_squared(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc;
}

double norm_squared(const ComplexGrid& g) {
  double acc = 0.0;
  for (const auto& z : g.values) acc += std::norm(z);
  return acc;
}

// Least-squares refinement of x toward A x = target by conjugate gradients on
// the normal equations, starting from the current x. The residual norm never
// increases.
void refine_least_squares(std::vector<double>& x, const ComplexGrid& target,
                          const Filterbank& bank, std::size_t steps) {
  auto residual = target;
  const auto ax = analyze_unchecked(x, bank);
  for (std::size_t i = 0; i < residual.values.size(); ++i) residual.values[i] -= ax.values[i];
  auto s = synthesize(residual, bank, x.size());
  auto p = s;
  double gamma = norm_squared(s);
  for (std::size_t step = 0; step < steps && gamma > 0.0; ++step) {
    const auto q = analyze_unchecked(p, bank);
    const double qq = norm_squared(q);
    if (!(qq > 0.0)) break;
    const double alpha = gamma / qq;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += alpha * p[i];
    for (std::size_t i = 0; i < residual.values.size(); ++i) residual.values[i] -= alpha * q.values[i];
    s = synthesize(residual, bank, x.size());
    const double next = norm_squared(s);
    const double beta = next / gamma;
    gamma = next;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = s[i] + beta * p[i];
  }
}

}  // namespace

ComplexGrid forward_cqt(std::span<const double> signal, const Filterbank& bank) {
  if (signal.size() < bank.longest_window())
    throw std::length_error("forward_cqt: signal of " + std::to_string(signal.size()) +
                            " samples is shorter than the longest kernel (" +
                            std::to_string(bank.longest_window()) + ")");
  return analyze_unchecked(signal, bank);
}

std::vector<double> synthesize(const ComplexGrid& grid, const Filterbank& bank,
                               std::size_t signal_length) {
  std::vector<double> out(signal_length, 0.0);
  const auto length = static_cast<std::ptrdiff_t>(signal_length);
  for (std::size_t k = 0; k < grid.bins; ++k) {
    const auto& kernel = bank.kernels[k];
    const auto n = static_cast<std::ptrdiff_t>(kernel.window_length);
    for (std::size_t t = 0; t < grid.frames; ++t) {
      const auto z = grid.values[k * grid.frames + t];
      const auto start = window_start(kernel, t, bank.config.hop);
      const auto lo = std::max<std::ptrdiff_t>(0, -start);
      const auto hi = std::min<std::ptrdiff_t>(n, length - start);
      for (auto i = lo; i < hi; ++i) {
        const auto& h = kernel.coeffs[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(start + i)] += h.real() * z.real() - h.imag() * z.imag();
      }
    }
  }
  return out;
}

Spectrogram compress(const ComplexGrid& grid, const CqtConfig& config) {
  Spectrogram spec{grid.bins, grid.frames, std::vector<double>(grid.values.size()), config};
  for (std::size_t i = 0; i < grid.values.size(); ++i)
    spec.values[i] = std::log1p(config.gamma * std::abs(grid.values[i]));
  return spec;
}

std::vector<double> decompress(const Spectrogram& spec) {
  std::vector<double> mag(spec.values.size());
  for (std::size_t i = 0; i < mag.size(); ++i)
    mag[i] = std::expm1(std::max(0.0, spec.values[i])) / spec.config.gamma;
  return mag;
}

Spectrogram analyze(std::span<const double> signal, const Filterbank& bank) {
  return compress(forward_cqt(signal, bank), bank.config);
}

InversionResult inverse_cqt(const Spectrogram& spec, const Filterbank& bank,
                            InversionOptions options) {
  if (options.iterations == 0) throw std::invalid_argument("inverse_cqt: iterations must be >= 1");
  if (spec.bins != bank.kernels.size())
    throw std::invalid_argument("inverse_cqt: spectrogram has " + std::to_string(spec.bins) +
                                " bins, filterbank has " + std::to_string(bank.kernels.size()));
  const std::size_t length = options.signal_length != 0
                                 ? options.signal_length
                                 : (spec.frames - 1) * bank.config.hop + 1;
  if (bank.config.frames_for(length) != spec.frames)
    throw std::invalid_argument("inverse_cqt: signal length " + std::to_string(length) +
                                " does not produce " + std::to_string(spec.frames) + " frames");

  const auto magnitude = decompress(spec);
  const double target_norm = std::sqrt(norm_squared(magnitude));
  InversionResult result;
  result.samples.assign(length, 0.0);
  if (!(target_norm > 0.0)) {
    result.error_history.assign(options.iterations, 0.0);
    return result;
  }

  Rng rng(options.seed);
  ComplexGrid target{spec.bins, spec.frames, std::vector<std::complex<double>>(magnitude.size())};
  for (std::size_t i = 0; i < magnitude.size(); ++i)
    target.values[i] = std::polar(magnitude[i], 2.0 * std::numbers::pi * uniform01(rng));

  for (std::size_t iter = 0; iter < options.iterations; ++iter) {
    refine_least_squares(result.samples, target, bank, options.solver_steps);
    const auto estimate = analyze_unchecked(result.samples, bank);
    double err = 0.0;
    for (std::size_t i = 0; i < magnitude.size(); ++i) {
      const double a = std::abs(estimate.values[i]);
      err += (a - magnitude[i]) * (a - magnitude[i]);
      // Keep the previous phase where the estimate vanishes.
      if (a > 0.0) target.values[i] = estimate.values[i] * (magnitude[i] / a);
    }
    result.error_history.push_back(std::sqrt(err) / target_norm);
  }
  return result;
}

std::optional<std::size_t> estimate_f0_bin(const Spectrogram& spec) {
  if (spec.frames == 0 || spec.bins == 0) return std::nullopt;
  std::vector<double> frame_max(spec.frames, 0.0);
  for (std::size_t t = 0; t < spec.frames; ++t)
    for (std::size_t k = 0; k < spec.bins; ++k) frame_max[t] = std::max(frame_max[t], spec.at(k, t));
  const double loudest = *std::max_element(frame_max.begin(), frame_max.end());
  if (!(loudest > 1e-9)) return std::nullopt;

  std::vector<std::size_t> picks;
  for (std::size_t t = 0; t < spec.frames; ++t) {
    if (frame_max[t] < 0.25 * loudest) continue;
    const double floor = 0.5 * frame_max[t];
    for (std::size_t k = 0; k < spec.bins; ++k) {
      const double v = spec.at(k, t);
      const bool rises = k == 0 || v > spec.at(k - 1, t);
      const bool falls = k + 1 == spec.bins || v >= spec.at(k + 1, t);
      if (rises && falls && v > floor) {
        picks.push_back(k);
        break;
      }
    }
  }
  if (picks.empty()) return std::nullopt;
  auto mid = picks.begin() + static_cast<std::ptrdiff_t>((picks.size() - 1) / 2);
  std::nth_element(picks.begin(), mid, picks.end());
  return *mid;
}

std::optional<double> estimate_f0(const Spectrogram& spec) {
  const auto bin = estimate_f0_bin(spec);
  if (!bin) return std::nullopt;
  return spec.config.center_frequency(*bin);
}

}  // namespace vc

#pragma once

// Constant-Q analysis by direct inner products against a bank of
// Hann-windowed complex exponentials, log-magnitude compression, and
// magnitude-only resynthesis by alternating projections.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace vc {

class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

struct CqtConfig {
  double sample_rate = 8000.0;
  double f_min = 110.0;
  std::size_t bins_per_octave = 12;
  std::size_t n_bins = 48;
  std::size_t hop = 64;
  double q_scale = 1.0;
  double gamma = 100.0;  // log-compression gain

  void validate() const;
  double center_frequency(std::size_t bin) const;
  // Q = 1 / (2^(1/B) - 1)
  double quality() const;
  std::size_t frames_for(std::size_t signal_length) const { return signal_length / hop + 1; }
  // Nearest bin index to a frequency (may fall outside [0, n_bins)).
  long nearest_bin(double hz) const;

  bool operator==(const CqtConfig&) const = default;
};

struct CqtKernel {
  double center_frequency = 0.0;
  std::size_t window_length = 0;
  // Window normalized to unit L1 norm times exp(i 2 pi f (n - L/2) / sr).
  std::vector<std::complex<double>> coeffs;
};

struct Filterbank {
  CqtConfig config;
  std::vector<CqtKernel> kernels;

  std::size_t longest_window() const;
};

Filterbank design_filterbank(const CqtConfig& config);

struct ComplexGrid {
  std::size_t bins = 0;
  std::size_t frames = 0;
  std::vector<std::complex<double>> values;  // bin-major: values[k * frames + t]

  std::complex<double> at(std::size_t k, std::size_t t) const { return values[k * frames + t]; }
};

struct Spectrogram {
  std::size_t bins = 0;
  std::size_t frames = 0;
  std::vector<double> values;  // bin-major, log-compressed magnitudes
  CqtConfig config;

  double at(std::size_t k, std::size_t t) const { return values[k * frames + t]; }
  double& at(std::size_t k, std::size_t t) { return values[k * frames + t]; }
};

// Frame t is centred on sample t * hop; the signal is zero outside its range.
// Throws std::length_error if the signal is shorter than the longest kernel.
ComplexGrid forward_cqt(std::span<const double> signal, const Filterbank& bank);

// Transposed filterbank summation (the adjoint of forward_cqt for real signals).
std::vector<double> synthesize(const ComplexGrid& grid, const Filterbank& bank,
                               std::size_t signal_length);

Spectrogram compress(const ComplexGrid& grid, const CqtConfig& config);
// Linear magnitudes: expm1(v) / gamma.
std::vector<double> decompress(const Spectrogram& spec);

// Convenience: forward_cqt followed by compress.
Spectrogram analyze(std::span<const double> signal, const Filterbank& bank);

struct InversionOptions {
  std::size_t iterations = 50;
  std::uint64_t seed = 0;
  std::size_t signal_length = 0;  // 0: (frames - 1) * hop + 1
  std::size_t solver_steps = 4;   // least-squares refinements per iteration
};

struct InversionResult {
  std::vector<double> samples;
  // ||  |CQT(x_i)| - M || / ||M|| after each iteration i.
  std::vector<double> error_history;
};

InversionResult inverse_cqt(const Spectrogram& spec, const Filterbank& bank,
                            InversionOptions options = {});

// Median over active frames of the lowest local-maximum bin above half the
// frame maximum. Frames quieter than a quarter of the loudest frame are
// ignored. Empty for silence.
std::optional<std::size_t> estimate_f0_bin(const Spectrogram& spec);
std::optional<double> estimate_f0(const Spectrogram& spec);

}  // namespace vc

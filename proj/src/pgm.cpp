#include "vc/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "vc/binary_io.hpp"

namespace vc {

GrayImage render_spectrogram(const Spectrogram& spec) {
  return render_panels(std::span<const Spectrogram>(&spec, 1), 0);
}

GrayImage render_panels(std::span<const Spectrogram> panels, std::size_t gap) {
  if (panels.empty()) throw std::invalid_argument("render: no spectrograms");
  const auto bins = panels.front().bins;
  double lo = INFINITY, hi = -INFINITY;
  std::size_t width = 0;
  for (const auto& p : panels) {
    if (p.bins == 0 || p.frames == 0 || p.values.size() != p.bins * p.frames)
      throw std::invalid_argument("render: empty spectrogram");
    if (p.bins != bins) throw std::invalid_argument("render: panels differ in bin count");
    for (double v : p.values) {
      if (!std::isfinite(v)) throw std::invalid_argument("render: non-finite value");
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    width += p.frames;
  }
  width += gap * (panels.size() - 1);

  GrayImage img{width, bins, std::vector<std::uint8_t>(width * bins, 255)};
  std::size_t x0 = 0;
  for (const auto& p : panels) {
    for (std::size_t k = 0; k < bins; ++k) {
      const auto y = bins - 1 - k;
      for (std::size_t t = 0; t < p.frames; ++t) {
        const double level = hi > lo ? (p.at(k, t) - lo) / (hi - lo) : 0.5;
        img.pixels[y * width + x0 + t] = static_cast<std::uint8_t>(std::lround(255.0 * level));
      }
    }
    x0 += p.frames + gap;
  }
  return img;
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& image) {
  ByteWriter w;
  w.raw("P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n");
  auto bytes = w.take();
  bytes.insert(bytes.end(), image.pixels.begin(), image.pixels.end());
  return bytes;
}

void write_pgm(const GrayImage& image, const std::filesystem::path& path) {
  write_file(path, encode_pgm(image));
}

}  // namespace vc

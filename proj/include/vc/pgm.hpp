#pragma once

// Grayscale spectrogram images. Width is frames, height is bins with the
// lowest bin on the bottom row. Values are min-max normalized over the whole
// image; a constant image maps to mid-gray (128).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vc/cqt.hpp"

namespace vc {

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, top row first

  std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
};

// Throws std::invalid_argument for an empty spectrogram.
GrayImage render_spectrogram(const Spectrogram& spec);
// Panels left to right with a white separator `gap` pixels wide. All panels
// share one normalization and must have the same bin count.
GrayImage render_panels(std::span<const Spectrogram> panels, std::size_t gap = 2);

// Binary PGM (P5) encoding.
std::vector<std::uint8_t> encode_pgm(const GrayImage& image);
void write_pgm(const GrayImage& image, const std::filesystem::path& path);

}  // namespace vc

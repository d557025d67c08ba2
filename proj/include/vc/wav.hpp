#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vc/binary_io.hpp"

namespace vc {

struct Utterance {
  int speaker_id = -1;  // -1 when unknown (e.g. read from disk)
  int word_id = -1;
  std::vector<double> samples;
  double sample_rate = 8000.0;
  std::uint64_t variant_seed = 0;
};

// 16-bit PCM mono RIFF/WAVE. Samples are quantized as round(x * 32768)
// clamped to the int16 range; peak must not exceed 1.0.
std::vector<std::uint8_t> encode_wav(const Utterance& utterance);
// Throws ParseError (with byte offset) on malformed or unsupported input.
Utterance decode_wav(std::span<const std::uint8_t> bytes);

void wav_write(const Utterance& utterance, const std::filesystem::path& path);
Utterance wav_read(const std::filesystem::path& path);

}  // namespace vc

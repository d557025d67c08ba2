#include "vc/wav.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vc {

std::vector<std::uint8_t> encode_wav(const Utterance& utterance) {
  for (double s : utterance.samples)
    if (!(std::abs(s) <= 1.0))
      throw std::invalid_argument("wav: sample magnitude exceeds 1.0");
  const auto rate = static_cast<std::uint32_t>(std::lround(utterance.sample_rate));
  const auto data_bytes = static_cast<std::uint32_t>(utterance.samples.size() * 2);

  ByteWriter w;
  w.raw("RIFF");
  w.u32(36 + data_bytes);
  w.raw("WAVE");
  w.raw("fmt ");
  w.u32(16);
  w.u16(1);  // PCM
  w.u16(1);  // mono
  w.u32(rate);
  w.u32(rate * 2);
  w.u16(2);
  w.u16(16);
  w.raw("data");
  w.u32(data_bytes);
  for (double s : utterance.samples) {
    const auto q = std::clamp(std::lround(s * 32768.0), -32768L, 32767L);
    w.i16(static_cast<std::int16_t>(q));
  }
  return w.take();
}

Utterance decode_wav(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.remaining() < 12) throw ParseError("wav: file too short for a RIFF header", r.offset());
  if (r.raw(4) != "RIFF") throw ParseError("wav: missing RIFF tag", 0);
  r.u32();
  if (r.raw(4) != "WAVE") throw ParseError("wav: missing WAVE tag", 8);

  bool have_fmt = false;
  Utterance u;
  while (!r.done()) {
    const auto chunk_at = r.offset();
    const auto id = r.raw(4);
    const auto size = r.u32();
    if (size > r.remaining())
      throw ParseError("wav: chunk '" + id + "' claims " + std::to_string(size) + " bytes", chunk_at);
    if (id == "fmt ") {
      if (size < 16) throw ParseError("wav: fmt chunk too small", chunk_at);
      const auto body = r.offset();
      const auto format = r.u16();
      const auto channels = r.u16();
      const auto rate = r.u32();
      r.u32();
      r.u16();
      const auto bits = r.u16();
      if (format != 1) throw ParseError("wav: unsupported encoding " + std::to_string(format) + " (PCM only)", body);
      if (channels != 1) throw ParseError("wav: unsupported channel count " + std::to_string(channels), body + 2);
      if (bits != 16) throw ParseError("wav: unsupported sample width " + std::to_string(bits), body + 14);
      if (rate == 0) throw ParseError("wav: zero sample rate", body + 4);
      u.sample_rate = rate;
      r.skip(size - 16);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw ParseError("wav: data chunk before fmt chunk", chunk_at);
      if (size % 2) throw ParseError("wav: odd data chunk size", chunk_at);
      u.samples.resize(size / 2);
      for (auto& s : u.samples) s = r.i16() / 32768.0;
      return u;
    } else {
      r.skip(size);
    }
    if (size % 2 && !r.done()) r.skip(1);
  }
  throw ParseError("wav: no data chunk", r.offset());
}

void wav_write(const Utterance& utterance, const std::filesystem::path& path) {
  write_file(path, encode_wav(utterance));
}

Utterance wav_read(const std::filesystem::path& path) { return decode_wav(read_file(path)); }

}  // namespace vc

#pragma once

// Synthetic multi-speaker, multi-word corpus. Speakers differ in fundamental
// frequency, spectral tilt and vibrato; words differ in formant pattern and
// amplitude envelope. Everything is a pure function of the corpus seed.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vc/cqt.hpp"
#include "vc/keyvalue.hpp"
#include "vc/random.hpp"
#include "vc/wav.hpp"

namespace vc {

struct SpeakerProfile {
  std::size_t id = 0;
  double f0 = 130.0;
  double harmonic_rolloff = 1.0;  // harmonic h has amplitude h^-rolloff
  double vibrato_rate = 5.0;      // Hz
  double vibrato_depth = 0.005;   // fraction of f0
};

struct Formant {
  double center = 500.0;
  double bandwidth = 100.0;
  double gain = 1.0;
};

struct EnvelopePoint {
  double time = 0.0;  // fraction of the utterance
  double level = 0.0;
};

struct WordProfile {
  std::size_t id = 0;
  std::string name;
  std::vector<Formant> formants;
  std::vector<EnvelopePoint> envelope;  // starts and ends at level 0

  double envelope_at(double fraction) const;
};

struct CorpusParams {
  std::size_t n_speakers = 2;
  std::size_t n_words = 4;
  std::size_t variants_per_cell = 20;
  std::uint64_t seed = 1;
  double duration = 0.5;             // seconds
  double max_harmonic_hz = 1600.0;   // harmonics above this are not synthesized
  double peak = 0.8;

  void validate() const;
};

// The four colour words come first; further words are generated procedurally.
std::vector<WordProfile> make_words(std::size_t count, std::uint64_t seed);
// f0 log-spaced over [130, 260] Hz.
std::vector<SpeakerProfile> make_speakers(std::size_t count, std::uint64_t seed);

// seed perturbs f0 by up to +-2 %, envelope breakpoints by up to +-5 % of the
// duration, and the harmonic phases.
Utterance synth_utterance(const SpeakerProfile& speaker, const WordProfile& word,
                          std::uint64_t seed, double sample_rate, double duration = 0.5,
                          double max_harmonic_hz = 1600.0, double peak = 0.8);

struct CorpusItem {
  std::size_t speaker = 0;
  std::size_t word = 0;
  std::size_t variant = 0;
  Utterance utterance;
  Spectrogram spectrogram;
};

struct Corpus {
  CorpusParams params;
  CqtConfig cqt;
  std::vector<SpeakerProfile> speakers;
  std::vector<WordProfile> words;
  std::vector<CorpusItem> items;  // ordered by (speaker, word, variant)

  std::size_t n_speakers() const { return speakers.size(); }
  std::size_t n_words() const { return words.size(); }
  std::size_t variants() const { return params.variants_per_cell; }
  const CorpusItem& item(std::size_t speaker, std::size_t word, std::size_t variant) const;
};

Corpus build_corpus(const CorpusParams& params, const CqtConfig& cqt);

// Container: "VCCP", version byte, length-prefixed key=value config block,
// record count, then length-prefixed records. See docs/formats.md.
std::vector<std::uint8_t> serialize_corpus(const Corpus& corpus);
Corpus deserialize_corpus(std::span<const std::uint8_t> bytes);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);

// CQT settings as "<prefix>sample_rate", "<prefix>f_min", ... entries.
void put_cqt_config(KeyValues& kv, const CqtConfig& config, const std::string& prefix);
CqtConfig get_cqt_config(const KeyValues& kv, const std::string& prefix);

// Half-open variant index range a draw may use (train / held-out split).
struct VariantRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct ItemLabel {
  std::size_t speaker = 0;
  std::size_t word = 0;
  std::size_t variant = 0;
};

// a=(s1,w1), b=(s2,w1), c=(s1,w2), d=(s2,w2) with s1 != s2 and w1 != w2.
// Spectrogram pointers refer into the (immutable) corpus.
struct AnalogyQuadruple {
  const Spectrogram* a = nullptr;
  const Spectrogram* b = nullptr;
  const Spectrogram* c = nullptr;
  const Spectrogram* d = nullptr;
  std::array<ItemLabel, 4> labels;

  bool structurally_valid() const;
};

AnalogyQuadruple sample_quadruple(const Corpus& corpus, Rng& rng, VariantRange variants);
AnalogyQuadruple sample_quadruple(const Corpus& corpus, Rng& rng);

}  // namespace vc

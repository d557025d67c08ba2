#include "vc/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "vc/binary_io.hpp"
#include "vc/keyvalue.hpp"

namespace vc {

namespace {

constexpr char kCorpusMagic[] = "VCCP";
constexpr std::uint8_t kCorpusVersion = 1;

}  // namespace

double WordProfile::envelope_at(double fraction) const {
  if (envelope.empty()) return 0.0;
  if (fraction <= envelope.front().time) return envelope.front().level;
  for (std::size_t i = 1; i < envelope.size(); ++i) {
    const auto& p = envelope[i - 1];
    const auto& q = envelope[i];
    if (fraction == q.time) return q.level;
    if (fraction < q.time) {
      const double span = q.time - p.time;
      if (span <= 0.0) return q.level;
      return p.level + (q.level - p.level) * (fraction - p.time) / span;
    }
  }
  return envelope.back().level;
}

void CorpusParams::validate() const {
  if (n_speakers < 2) throw ConfigError("corpus: n_speakers must be at least 2");
  if (n_words < 2) throw ConfigError("corpus: n_words must be at least 2");
  if (variants_per_cell == 0) throw ConfigError("corpus: variants_per_cell must be positive");
  if (!(duration > 0.0)) throw ConfigError("corpus: duration must be positive");
  if (!(peak > 0.0 && peak <= 1.0)) throw ConfigError("corpus: peak must lie in (0, 1]");
}

std::vector<WordProfile> make_words(std::size_t count, std::uint64_t seed) {
  std::vector<WordProfile> presets{
      {0, "red", {{700, 90, 3.0}, {1200, 120, 2.0}},
       {{0, 0}, {0.08, 1.0}, {0.45, 0.8}, {0.7, 0.25}, {1, 0}}},
      {1, "blue", {{300, 60, 3.0}, {900, 100, 2.0}},
       {{0, 0}, {0.3, 0.2}, {0.6, 1.0}, {0.85, 0.7}, {1, 0}}},
      {2, "green", {{420, 70, 3.0}, {1500, 150, 2.5}},
       {{0, 0}, {0.18, 1.0}, {0.38, 0.15}, {0.6, 1.0}, {0.8, 0.2}, {1, 0}}},
      {3, "white", {{550, 80, 2.5}, {1000, 100, 2.5}},
       {{0, 0}, {0.06, 0.65}, {0.9, 0.65}, {1, 0}}},
  };
  std::vector<WordProfile> words;
  for (std::size_t i = 0; i < count; ++i) {
    if (i < presets.size()) {
      words.push_back(presets[i]);
      continue;
    }
    Rng rng(mix_seed(seed, 1000 + i));
    WordProfile w;
    w.id = i;
    w.name = "word" + std::to_string(i);
    const std::size_t n_formants = 2 + uniform_index(rng, 2);
    for (std::size_t f = 0; f < n_formants; ++f)
      w.formants.push_back({uniform(rng, 300, 1500), uniform(rng, 60, 150), uniform(rng, 1.5, 3.0)});
    const std::size_t inner = 2 + uniform_index(rng, 3);
    w.envelope.push_back({0, 0});
    for (std::size_t p = 0; p < inner; ++p)
      w.envelope.push_back({(p + 1.0) / (inner + 1.0), uniform(rng, 0.2, 1.0)});
    w.envelope.push_back({1, 0});
    words.push_back(std::move(w));
  }
  return words;
}

std::vector<SpeakerProfile> make_speakers(std::size_t count, std::uint64_t seed) {
  std::vector<SpeakerProfile> speakers;
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(mix_seed(seed, 500 + i));
    SpeakerProfile s;
    s.id = i;
    s.f0 = count == 1 ? 130.0 : 130.0 * std::exp2(static_cast<double>(i) / static_cast<double>(count - 1));
    s.harmonic_rolloff = uniform(rng, 0.7, 1.3);
    s.vibrato_rate = uniform(rng, 4.0, 6.0);
    s.vibrato_depth = uniform(rng, 0.003, 0.008);
    speakers.push_back(s);
  }
  return speakers;
}

Utterance synth_utterance(const SpeakerProfile& speaker, const WordProfile& word,
                          std::uint64_t seed, double sample_rate, double duration,
                          double max_harmonic_hz, double peak) {
  Rng rng(seed);
  const double f0 = speaker.f0 * uniform(rng, 0.98, 1.02);

  WordProfile shaped = word;
  for (std::size_t i = 1; i + 1 < shaped.envelope.size(); ++i)
    shaped.envelope[i].time =
        std::clamp(shaped.envelope[i].time + uniform(rng, -0.05, 0.05), 0.01, 0.99);
  std::sort(shaped.envelope.begin() + 1, shaped.envelope.end() - 1,
            [](const auto& a, const auto& b) { return a.time < b.time; });

  const double ceiling = std::min(max_harmonic_hz, 0.45 * sample_rate);
  std::vector<double> amps, phases;
  for (std::size_t h = 1; h * f0 * (1.0 + speaker.vibrato_depth) <= ceiling; ++h) {
    const double freq = static_cast<double>(h) * f0;
    double boost = 1.0;
    for (const auto& f : word.formants) {
      const double z = (freq - f.center) / f.bandwidth;
      boost += f.gain * std::exp(-0.5 * z * z);
    }
    amps.push_back(std::pow(static_cast<double>(h), -speaker.harmonic_rolloff) * boost);
    phases.push_back(2.0 * std::numbers::pi * uniform01(rng));
  }
  const double vibrato_phase = 2.0 * std::numbers::pi * uniform01(rng);

  Utterance u;
  u.speaker_id = static_cast<int>(speaker.id);
  u.word_id = static_cast<int>(word.id);
  u.sample_rate = sample_rate;
  u.variant_seed = seed;
  const auto length = static_cast<std::size_t>(std::lround(duration * sample_rate));
  u.samples.assign(length, 0.0);
  const double w_rate = 2.0 * std::numbers::pi * speaker.vibrato_rate;
  for (std::size_t n = 0; n < length; ++n) {
    const double t = static_cast<double>(n) / sample_rate;
    // Integral of f0 * (1 + depth * sin(w t + p)).
    const double base_phase =
        2.0 * std::numbers::pi * f0 *
        (t + speaker.vibrato_depth * (std::cos(vibrato_phase) - std::cos(w_rate * t + vibrato_phase)) / w_rate);
    double x = 0.0;
    for (std::size_t h = 0; h < amps.size(); ++h)
      x += amps[h] * std::sin(static_cast<double>(h + 1) * base_phase + phases[h]);
    const double fraction = length > 1 ? static_cast<double>(n) / static_cast<double>(length - 1) : 0.0;
    u.samples[n] = x * shaped.envelope_at(fraction);
  }
  double top = 0.0;
  for (double s : u.samples) top = std::max(top, std::abs(s));
  if (top > 0.0)
    for (auto& s : u.samples) s *= peak / top;
  return u;
}

const CorpusItem& Corpus::item(std::size_t speaker, std::size_t word, std::size_t variant) const {
  return items.at((speaker * n_words() + word) * variants() + variant);
}

Corpus build_corpus(const CorpusParams& params, const CqtConfig& cqt) {
  params.validate();
  const auto bank = design_filterbank(cqt);
  Corpus corpus{params, cqt, make_speakers(params.n_speakers, params.seed),
                make_words(params.n_words, params.seed), {}};
  corpus.items.reserve(params.n_speakers * params.n_words * params.variants_per_cell);
  for (std::size_t s = 0; s < params.n_speakers; ++s)
    for (std::size_t w = 0; w < params.n_words; ++w)
      for (std::size_t v = 0; v < params.variants_per_cell; ++v) {
        const auto index = corpus.items.size();
        CorpusItem item{s, w, v, {}, {}};
        item.utterance = synth_utterance(corpus.speakers[s], corpus.words[w],
                                         mix_seed(params.seed, index), cqt.sample_rate,
                                         params.duration, params.max_harmonic_hz, params.peak);
        item.spectrogram = analyze(item.utterance.samples, bank);
        corpus.items.push_back(std::move(item));
      }
  return corpus;
}

// ---- container --------------------------------------------------------------

void put_cqt_config(KeyValues& kv, const CqtConfig& c, const std::string& prefix) {
  kv.set(prefix + "sample_rate", c.sample_rate);
  kv.set(prefix + "f_min", c.f_min);
  kv.set_uint(prefix + "bins_per_octave", c.bins_per_octave);
  kv.set_uint(prefix + "n_bins", c.n_bins);
  kv.set_uint(prefix + "hop", c.hop);
  kv.set(prefix + "q_scale", c.q_scale);
  kv.set(prefix + "gamma", c.gamma);
}

CqtConfig get_cqt_config(const KeyValues& kv, const std::string& prefix) {
  CqtConfig c;
  c.sample_rate = kv.get_double(prefix + "sample_rate");
  c.f_min = kv.get_double(prefix + "f_min");
  c.bins_per_octave = kv.get_uint(prefix + "bins_per_octave");
  c.n_bins = kv.get_uint(prefix + "n_bins");
  c.hop = kv.get_uint(prefix + "hop");
  c.q_scale = kv.get_double(prefix + "q_scale");
  c.gamma = kv.get_double(prefix + "gamma");
  return c;
}

namespace {

std::string join_formants(const std::vector<Formant>& fs) {
  std::string out;
  for (const auto& f : fs) {
    if (!out.empty()) out += ',';
    out += format_double(f.center) + ':' + format_double(f.bandwidth) + ':' + format_double(f.gain);
  }
  return out;
}

std::string join_envelope(const std::vector<EnvelopePoint>& env) {
  std::string out;
  for (const auto& p : env) {
    if (!out.empty()) out += ',';
    out += format_double(p.time) + ':' + format_double(p.level);
  }
  return out;
}

std::vector<std::vector<double>> split_tuples(const std::string& text, std::size_t arity,
                                              const std::string& what) {
  std::vector<std::vector<double>> out;
  std::istringstream in(text);
  std::string tuple;
  while (std::getline(in, tuple, ',')) {
    std::vector<double> fields;
    std::istringstream tin(tuple);
    std::string field;
    while (std::getline(tin, field, ':')) fields.push_back(parse_double(field, what));
    if (fields.size() != arity) throw std::invalid_argument(what + ": malformed entry '" + tuple + "'");
    out.push_back(std::move(fields));
  }
  return out;
}

KeyValues corpus_config_block(const Corpus& c) {
  KeyValues kv;
  put_cqt_config(kv, c.cqt, "cqt.");
  kv.set_uint("corpus.n_speakers", c.params.n_speakers);
  kv.set_uint("corpus.n_words", c.params.n_words);
  kv.set_uint("corpus.variants_per_cell", c.params.variants_per_cell);
  kv.set_uint("corpus.seed", c.params.seed);
  kv.set("corpus.duration", c.params.duration);
  kv.set("corpus.max_harmonic_hz", c.params.max_harmonic_hz);
  kv.set("corpus.peak", c.params.peak);
  for (const auto& s : c.speakers) {
    const auto p = "speaker." + std::to_string(s.id) + ".";
    kv.set(p + "f0", s.f0);
    kv.set(p + "harmonic_rolloff", s.harmonic_rolloff);
    kv.set(p + "vibrato_rate", s.vibrato_rate);
    kv.set(p + "vibrato_depth", s.vibrato_depth);
  }
  for (const auto& w : c.words) {
    const auto p = "word." + std::to_string(w.id) + ".";
    kv.set(p + "name", w.name);
    kv.set(p + "formants", join_formants(w.formants));
    kv.set(p + "envelope", join_envelope(w.envelope));
  }
  return kv;
}

}  // namespace

std::vector<std::uint8_t> serialize_corpus(const Corpus& corpus) {
  ByteWriter w;
  w.raw(kCorpusMagic);
  w.u8(kCorpusVersion);
  w.str(corpus_config_block(corpus).to_text());
  w.u32(static_cast<std::uint32_t>(corpus.items.size()));
  for (const auto& item : corpus.items) {
    const auto length_at = w.size();
    w.u32(0);
    w.u32(static_cast<std::uint32_t>(item.speaker));
    w.u32(static_cast<std::uint32_t>(item.word));
    w.u32(static_cast<std::uint32_t>(item.variant));
    w.u64(item.utterance.variant_seed);
    w.f64(item.utterance.sample_rate);
    w.u32(static_cast<std::uint32_t>(item.utterance.samples.size()));
    w.f64s(item.utterance.samples);
    w.u32(static_cast<std::uint32_t>(item.spectrogram.bins));
    w.u32(static_cast<std::uint32_t>(item.spectrogram.frames));
    w.f64s(item.spectrogram.values);
    w.patch_u32(length_at, static_cast<std::uint32_t>(w.size() - length_at - 4));
  }
  return w.take();
}

Corpus deserialize_corpus(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.remaining() < 5 || r.raw(4) != kCorpusMagic) throw ParseError("corpus: bad magic tag", 0);
  const auto version = r.u8();
  if (version != kCorpusVersion)
    throw ParseError("corpus: unsupported version " + std::to_string(version), 4);
  const auto config_at = r.offset();
  KeyValues kv;
  try {
    kv = KeyValues::parse(r.str());
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("corpus: config block: ") + e.what(), config_at);
  }

  Corpus c;
  try {
    c.cqt = get_cqt_config(kv, "cqt.");
    c.params.n_speakers = kv.get_uint("corpus.n_speakers");
    c.params.n_words = kv.get_uint("corpus.n_words");
    c.params.variants_per_cell = kv.get_uint("corpus.variants_per_cell");
    c.params.seed = kv.get_uint("corpus.seed");
    c.params.duration = kv.get_double("corpus.duration");
    c.params.max_harmonic_hz = kv.get_double("corpus.max_harmonic_hz");
    c.params.peak = kv.get_double("corpus.peak");
    for (std::size_t i = 0; i < c.params.n_speakers; ++i) {
      const auto p = "speaker." + std::to_string(i) + ".";
      c.speakers.push_back({i, kv.get_double(p + "f0"), kv.get_double(p + "harmonic_rolloff"),
                            kv.get_double(p + "vibrato_rate"), kv.get_double(p + "vibrato_depth")});
    }
    for (std::size_t i = 0; i < c.params.n_words; ++i) {
      const auto p = "word." + std::to_string(i) + ".";
      WordProfile w{i, kv.get(p + "name"), {}, {}};
      for (auto& f : split_tuples(kv.get(p + "formants"), 3, p + "formants"))
        w.formants.push_back({f[0], f[1], f[2]});
      for (auto& e : split_tuples(kv.get(p + "envelope"), 2, p + "envelope"))
        w.envelope.push_back({e[0], e[1]});
      c.words.push_back(std::move(w));
    }
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("corpus: config block: ") + e.what(), config_at);
  }

  const auto count = r.u32();
  const auto expected = c.params.n_speakers * c.params.n_words * c.params.variants_per_cell;
  if (count != expected)
    throw ParseError("corpus: " + std::to_string(count) + " records, expected " + std::to_string(expected),
                     r.offset() - 4);
  c.items.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto record_at = r.offset();
    const auto length = r.u32();
    if (length > r.remaining()) throw ParseError("corpus: record overruns file", record_at);
    const auto end = r.offset() + length;
    CorpusItem item;
    item.speaker = r.u32();
    item.word = r.u32();
    item.variant = r.u32();
    item.utterance.variant_seed = r.u64();
    item.utterance.sample_rate = r.f64();
    item.utterance.speaker_id = static_cast<int>(item.speaker);
    item.utterance.word_id = static_cast<int>(item.word);
    item.utterance.samples = r.f64s(r.u32());
    item.spectrogram.bins = r.u32();
    item.spectrogram.frames = r.u32();
    item.spectrogram.values = r.f64s(item.spectrogram.bins * item.spectrogram.frames);
    item.spectrogram.config = c.cqt;
    if (r.offset() != end) throw ParseError("corpus: record length mismatch", record_at);
    const auto want = (item.speaker * c.params.n_words + item.word) * c.params.variants_per_cell + item.variant;
    if (want != i) throw ParseError("corpus: records out of order", record_at);
    c.items.push_back(std::move(item));
  }
  if (!r.done()) throw ParseError("corpus: trailing bytes", r.offset());
  return c;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  write_file(path, serialize_corpus(corpus));
}

Corpus load_corpus(const std::filesystem::path& path) { return deserialize_corpus(read_file(path)); }

// ---- sampling -----------------------------------------------------------------

bool AnalogyQuadruple::structurally_valid() const {
  const auto& [la, lb, lc, ld] = labels;
  return la.word == lb.word && lc.word == ld.word && la.word != lc.word &&
         la.speaker == lc.speaker && lb.speaker == ld.speaker && la.speaker != lb.speaker;
}

AnalogyQuadruple sample_quadruple(const Corpus& corpus, Rng& rng, VariantRange variants) {
  if (corpus.n_speakers() < 2 || corpus.n_words() < 2)
    throw ConfigError("sample_quadruple: need at least 2 speakers and 2 words");
  if (variants.begin >= variants.end || variants.end > corpus.variants())
    throw ConfigError("sample_quadruple: empty or out-of-range variant range");
  const auto s1 = uniform_index(rng, corpus.n_speakers());
  auto s2 = uniform_index(rng, corpus.n_speakers() - 1);
  if (s2 >= s1) ++s2;
  const auto w1 = uniform_index(rng, corpus.n_words());
  auto w2 = uniform_index(rng, corpus.n_words() - 1);
  if (w2 >= w1) ++w2;
  const auto span = variants.end - variants.begin;
  AnalogyQuadruple q;
  const std::size_t speakers[4] = {s1, s2, s1, s2};
  const std::size_t words[4] = {w1, w1, w2, w2};
  const Spectrogram* specs[4];
  for (int i = 0; i < 4; ++i) {
    const auto v = variants.begin + uniform_index(rng, span);
    q.labels[i] = {speakers[i], words[i], v};
    specs[i] = &corpus.item(speakers[i], words[i], v).spectrogram;
  }
  q.a = specs[0];
  q.b = specs[1];
  q.c = specs[2];
  q.d = specs[3];
  return q;
}

AnalogyQuadruple sample_quadruple(const Corpus& corpus, Rng& rng) {
  return sample_quadruple(corpus, rng, {0, corpus.variants()});
}

}  // namespace vc

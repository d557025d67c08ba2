#include <cmath>
#include <filesystem>
#include <map>

#include "doctest.h"
#include "vc/corpus.hpp"
#include "vc/wav.hpp"

using namespace vc;

namespace {

const Corpus& default_corpus() {
  static const Corpus corpus = build_corpus(CorpusParams{}, CqtConfig{});
  return corpus;
}

}  // namespace

TEST_CASE("utterance synthesis") {
  const auto speakers = make_speakers(2, 1);
  const auto words = make_words(4, 1);
  const auto u1 = synth_utterance(speakers[0], words[2], 42, 8000.0);
  const auto u2 = synth_utterance(speakers[0], words[2], 42, 8000.0);
  CHECK(u1.samples == u2.samples);
  CHECK(u1.samples.size() == 4000);
  CHECK(u1.samples.front() == 0.0);
  CHECK(u1.samples.back() == 0.0);
  double peak = 0.0;
  for (double s : u1.samples) peak = std::max(peak, std::abs(s));
  CHECK(peak <= 1.0);
  CHECK(synth_utterance(speakers[0], words[2], 43, 8000.0).samples != u1.samples);

  for (const auto& w : words) {
    CHECK(w.formants.size() >= 1);
    CHECK(w.envelope.front().level == 0.0);
    CHECK(w.envelope.back().level == 0.0);
  }
  CHECK(words[0].name == "red");
  CHECK(words[3].name == "white");
  const auto more = make_words(6, 1);
  CHECK(more[5].envelope.front().level == 0.0);
  CHECK(more[5].envelope.back().level == 0.0);
}

TEST_CASE("corpus construction") {
  const auto& c = default_corpus();
  CHECK(c.items.size() == 160);
  CHECK(c.speakers[0].f0 == 130.0);
  CHECK(c.speakers[1].f0 == 260.0);
  for (const auto& s : make_speakers(5, 3)) {
    CHECK(s.f0 >= 110.0);
    CHECK(s.f0 <= 440.0);
  }
  for (const auto& item : c.items) {
    CHECK(item.spectrogram.bins == 48);
    CHECK(item.spectrogram.frames == 63);
  }
  CHECK_THROWS_AS(build_corpus({1, 4, 2}, CqtConfig{}), ConfigError);
  CHECK_THROWS_AS(build_corpus({2, 1, 2}, CqtConfig{}), ConfigError);

  SUBCASE("pure function of the seed, lossless container") {
    const auto bytes = serialize_corpus(c);
    CHECK(serialize_corpus(build_corpus(CorpusParams{}, CqtConfig{})) == bytes);
    const auto back = deserialize_corpus(bytes);
    CHECK(serialize_corpus(back) == bytes);
    CHECK(back.words[2].formants.size() == c.words[2].formants.size());
    CHECK(back.item(1, 3, 7).spectrogram.values == c.item(1, 3, 7).spectrogram.values);
    CorpusParams other;
    other.seed = 2;
    other.variants_per_cell = 1;
    CorpusParams same = CorpusParams{};
    same.variants_per_cell = 1;
    CHECK(serialize_corpus(build_corpus(other, CqtConfig{})) !=
          serialize_corpus(build_corpus(same, CqtConfig{})));
  }
  SUBCASE("malformed container") {
    auto bytes = serialize_corpus(c);
    bytes.resize(bytes.size() / 2);
    CHECK_THROWS_AS(deserialize_corpus(bytes), ParseError);
    bytes[0] = 'X';
    CHECK_THROWS_AS(deserialize_corpus(bytes), ParseError);
  }
}

TEST_CASE("speakers are separable by fundamental") {
  const auto& c = default_corpus();
  std::map<std::size_t, std::pair<long, long>> range;  // speaker -> (min bin, max bin)
  for (const auto& item : c.items) {
    const auto bin = estimate_f0_bin(item.spectrogram);
    REQUIRE(bin.has_value());
    const long b = static_cast<long>(*bin);
    CHECK(std::abs(b - c.cqt.nearest_bin(c.speakers[item.speaker].f0)) <= 1);
    auto [it, fresh] = range.try_emplace(item.speaker, b, b);
    it->second.first = std::min(it->second.first, b);
    it->second.second = std::max(it->second.second, b);
  }
  CHECK(range[0].second < range[1].first);
}

TEST_CASE("words are separable by a nearest-centroid classifier") {
  const auto& c = default_corpus();
  const std::size_t train_variants = 16;
  const auto K = c.cqt.n_bins;
  auto features = [&](const Spectrogram& s) {
    std::vector<double> f(K, 0.0);
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t t = 0; t < s.frames; ++t) f[k] += s.at(k, t) / static_cast<double>(s.frames);
    return f;
  };
  std::vector<std::vector<double>> centroid(c.n_words(), std::vector<double>(K, 0.0));
  for (const auto& item : c.items)
    if (item.variant < train_variants) {
      const auto f = features(item.spectrogram);
      for (std::size_t k = 0; k < K; ++k) centroid[item.word][k] += f[k];
    }
  std::size_t correct = 0, total = 0;
  for (const auto& item : c.items) {
    if (item.variant < train_variants) continue;
    const auto f = features(item.spectrogram);
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t w = 0; w < c.n_words(); ++w) {
      const double n = static_cast<double>(train_variants * c.n_speakers());
      double d = 0.0;
      for (std::size_t k = 0; k < K; ++k) d += std::pow(f[k] - centroid[w][k] / n, 2);
      if (d < best_d) best_d = d, best = w;
    }
    correct += best == item.word;
    ++total;
  }
  const double accuracy = static_cast<double>(correct) / static_cast<double>(total);
  MESSAGE("nearest-centroid word accuracy on held-out variants: " << accuracy);
  CHECK(accuracy > 0.9);
}

TEST_CASE("analogy quadruple sampling") {
  const auto& c = default_corpus();
  Rng rng(5);
  const std::size_t draws = 10000;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> cell_counts;
  for (std::size_t i = 0; i < draws; ++i) {
    const auto q = sample_quadruple(c, rng);
    REQUIRE(q.structurally_valid());
    CHECK(q.d == &c.item(q.labels[3].speaker, q.labels[3].word, q.labels[3].variant).spectrogram);
    ++cell_counts[{q.labels[3].speaker, q.labels[3].word}];
  }
  // With s2 uniform over the speakers other than a uniform s1 (and likewise
  // for words), every (s, w) cell is equally likely for d.
  const double p = 1.0 / static_cast<double>(c.n_speakers() * c.n_words());
  const double sigma = std::sqrt(draws * p * (1 - p));
  REQUIRE(cell_counts.size() == c.n_speakers() * c.n_words());
  for (const auto& [cell, n] : cell_counts) CHECK(std::abs(n - draws * p) <= 3 * sigma);

  Rng r1(9), r2(9);
  for (int i = 0; i < 20; ++i) {
    const auto q1 = sample_quadruple(c, r1), q2 = sample_quadruple(c, r2);
    for (int j = 0; j < 4; ++j) {
      CHECK(q1.labels[j].speaker == q2.labels[j].speaker);
      CHECK(q1.labels[j].word == q2.labels[j].word);
      CHECK(q1.labels[j].variant == q2.labels[j].variant);
    }
  }

  Rng r3(1);
  for (int i = 0; i < 200; ++i) {
    const auto q = sample_quadruple(c, r3, {16, 20});
    for (const auto& l : q.labels) CHECK(l.variant >= 16);
  }
  CHECK_THROWS_AS(sample_quadruple(c, r3, {5, 5}), ConfigError);
}

TEST_CASE("wav files") {
  const auto& c = default_corpus();
  const auto& u = c.item(0, 1, 2).utterance;
  const auto bytes = encode_wav(u);
  CHECK(bytes.size() == 44 + 8000);
  CHECK(bytes[40] + 256 * bytes[41] + 65536 * bytes[42] == 8000);

  const auto back = decode_wav(bytes);
  CHECK(back.sample_rate == 8000.0);
  REQUIRE(back.samples.size() == u.samples.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < u.samples.size(); ++i)
    worst = std::max(worst, std::abs(back.samples[i] - u.samples[i]));
  CHECK(worst <= std::ldexp(1.0, -15));

  Utterance full{-1, -1, {1.0, -1.0, 0.5}, 8000.0, 0};
  const auto fb = decode_wav(encode_wav(full));
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(fb.samples[i] - full.samples[i]) <= std::ldexp(1.0, -15));

  const auto path = std::filesystem::temp_directory_path() / "vc_test_roundtrip.wav";
  wav_write(u, path);
  CHECK(wav_read(path).samples == back.samples);
  std::filesystem::remove(path);

  std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + 30);
  CHECK_THROWS_AS(decode_wav(truncated), ParseError);
  CHECK_THROWS_AS(decode_wav(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 6)), ParseError);
  try {
    decode_wav(truncated);
  } catch (const ParseError& e) {
    CHECK(e.offset() <= truncated.size());
  }

  auto float_format = bytes;
  float_format[20] = 3;  // IEEE float
  CHECK_THROWS_AS(decode_wav(float_format), ParseError);
  auto stereo = bytes;
  stereo[22] = 2;
  CHECK_THROWS_AS(decode_wav(stereo), ParseError);

  Utterance loud{-1, -1, {1.5}, 8000.0, 0};
  CHECK_THROWS_AS(encode_wav(loud), std::invalid_argument);
}

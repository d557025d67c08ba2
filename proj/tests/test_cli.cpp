#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "vc/checkpoint.hpp"
#include "vc/pgm.hpp"
#include "vc/run_config.hpp"
#include "vc/wav.hpp"

using namespace vc;
namespace fs = std::filesystem;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "vc_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Run vcgan(const std::string& args) {
  const auto out = work_dir() / "stdout.txt", err = work_dir() / "stderr.txt";
  const std::string cmd = std::string("\"") + VC_CLI_PATH + "\" " + args + " >\"" + out.string() +
                          "\" 2>\"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

fs::path write_text(const std::string& name, const std::string& text) {
  const auto path = work_dir() / name;
  std::ofstream(path) << text;
  return path;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

// Small enough to train for a few steps in a test.
const char* kSmallConfig =
    "version = 1\n"
    "corpus.variants_per_cell = 4\n"
    "train.batch_size = 4\n"
    "train.steps = 6\n"
    "train.checkpoint_interval = 3\n"
    "train.held_out_variants = 1\n"
    "train.log_interval = 2\n"
    "render.inversion_iterations = 5\n"
    "eval.quadruples = 16\n";

const fs::path& trained_run() {
  static const fs::path dir = [] {
    const auto config = write_text("small.cfg", kSmallConfig);
    const auto d = work_dir() / "run";
    REQUIRE(vcgan("gen-data --config " + q(config) + " --out " + q(d)).code == 0);
    REQUIRE(vcgan("train --config " + q(config) + " --out " + q(d)).code == 0);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("run config") {
  const auto defaults = parse_run_config("version = 1\n");
  CHECK(defaults.train.batch_size == 16);
  CHECK(defaults.corpus.variants_per_cell == 20);
  CHECK(parse_run_config(defaults.to_text()).to_text() == defaults.to_text());
  const auto small = parse_run_config(kSmallConfig);
  CHECK(small.train.steps == 6);
  CHECK(small.log_interval == 2);

  CHECK_THROWS_AS(parse_run_config("train.steps = 5\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("version = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("version = 1\ntrain.batch_size = 5\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("version = 1\ntrain.steps = many\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("version = 1\nversion = 1\n"), ConfigError);
  try {
    parse_run_config("version = 1\ntrain.stepz = 5\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("train.stepz") != std::string::npos);
  }
}

TEST_CASE("spectrogram images") {
  Spectrogram flat{4, 3, std::vector<double>(12, 0.7), CqtConfig{}};
  const auto img = render_spectrogram(flat);
  CHECK(img.width == 3);
  CHECK(img.height == 4);
  for (auto p : img.pixels) CHECK(p == 128);
  const auto bytes = encode_pgm(img);
  CHECK(std::string(bytes.begin(), bytes.begin() + 11) == "P5\n3 4\n255\n");
  CHECK(bytes.size() == 11 + 12);

  Spectrogram ramp{2, 2, {0.0, 0.0, 1.0, 1.0}, CqtConfig{}};
  const auto r = render_spectrogram(ramp);
  CHECK(r.at(0, 1) == 0);    // bin 0 on the bottom row
  CHECK(r.at(0, 0) == 255);

  const CqtConfig cqt;
  const auto bank = design_filterbank(cqt);
  const std::size_t bin = 20;
  std::vector<double> tone(4000);
  for (std::size_t n = 0; n < tone.size(); ++n)
    tone[n] = 0.5 * std::sin(2 * std::numbers::pi * cqt.center_frequency(bin) * n / cqt.sample_rate);
  const auto spec = analyze(tone, bank);
  const auto t_img = render_spectrogram(spec);
  CHECK(t_img.width == spec.frames);
  CHECK(t_img.height == cqt.n_bins);
  const std::size_t x = spec.frames / 2;
  std::size_t brightest = 0;
  for (std::size_t y = 0; y < t_img.height; ++y)
    if (t_img.at(x, y) > t_img.at(x, brightest)) brightest = y;
  CHECK(brightest == cqt.n_bins - 1 - bin);

  const Spectrogram panels[] = {flat, flat};
  CHECK(render_panels(panels, 2).width == 8);
  CHECK_THROWS_AS(render_spectrogram(Spectrogram{}), std::invalid_argument);
}

TEST_CASE("usage errors") {
  CHECK(vcgan("").code == 2);
  CHECK(vcgan("frobnicate").code == 2);
  CHECK(vcgan("gen-data").code == 2);  // --out is required
  CHECK(vcgan("--help").code == 0);

  const auto bad = write_text("bad.cfg", "version = 1\ncorpus.nwords = 3\n");
  const auto r = vcgan("gen-data --config " + q(bad) + " --out " + q(work_dir() / "bad"));
  CHECK(r.code == 2);
  CHECK(r.err.find("corpus.nwords") != std::string::npos);
  const auto unversioned = write_text("unversioned.cfg", "corpus.n_words = 3\n");
  CHECK(vcgan("gen-data --config " + q(unversioned) + " --out " + q(work_dir() / "bad")).code == 2);
  CHECK(vcgan("train --out " + q(work_dir() / "nothing")).code == 2);
  CHECK(vcgan("eval " + q(work_dir() / "missing.vckp")).code == 2);
}

TEST_CASE("gen-data") {
  const auto config = write_text("gen.cfg", kSmallConfig);
  const auto d1 = work_dir() / "gen1", d2 = work_dir() / "gen2", d3 = work_dir() / "gen3";
  REQUIRE(vcgan("gen-data --config " + q(config) + " --out " + q(d1)).code == 0);
  REQUIRE(vcgan("gen-data --config " + q(config) + " --out " + q(d2)).code == 0);
  REQUIRE(vcgan("gen-data --config " + q(config) + " --seed 9 --out " + q(d3)).code == 0);
  const auto bytes = slurp(d1 / "corpus.vccp");
  CHECK(bytes == slurp(d2 / "corpus.vccp"));
  CHECK(bytes != slurp(d3 / "corpus.vccp"));
  CHECK(load_corpus(d1 / "corpus.vccp").items.size() == 32);
  CHECK(fs::exists(d1 / "samples" / "speaker1_green.wav"));
  const auto echoed = load_run_config(d3 / "config.txt");
  CHECK(echoed.corpus.seed == 9);
  CHECK(echoed.train.steps == 6);

  const auto full = work_dir() / "gen_default";
  REQUIRE(vcgan("gen-data --out " + q(full)).code == 0);
  CHECK(load_corpus(full / "corpus.vccp").items.size() == 160);
}

TEST_CASE("train and eval") {
  const auto& dir = trained_run();
  const auto log = slurp(dir / "metrics.tsv");
  std::size_t lines = 0;
  for (char ch : log) lines += ch == '\n';
  CHECK(lines == 7);
  CHECK(fs::exists(dir / "step_000003.vckp"));
  CHECK(fs::exists(dir / "step_000006.vckp"));
  CHECK(fs::exists(dir / "config.txt"));

  const auto config = write_text("small.cfg", kSmallConfig);
  const auto again = work_dir() / "run_again";
  fs::create_directories(again);
  fs::copy_file(dir / "corpus.vccp", again / "corpus.vccp");
  const auto r = vcgan("train --config " + q(config) + " --out " + q(again));
  REQUIRE(r.code == 0);
  CHECK(r.out.find("step 2 ") != std::string::npos);
  CHECK(slurp(again / "metrics.tsv") == log);
  // Checkpoints record the corpus path, so compare parameters across directories.
  CHECK(load_checkpoint(again / "step_000006.vckp").tensors ==
        load_checkpoint(dir / "step_000006.vckp").tensors);
  const auto final_bytes = slurp(again / "step_000006.vckp");

  const auto resumed = vcgan("train --config " + q(config) + " --out " + q(again) + " --resume " +
                             q(again / "step_000003.vckp"));
  REQUIRE(resumed.code == 0);
  CHECK(slurp(again / "metrics.tsv") == log);
  CHECK(slurp(again / "step_000006.vckp") == final_bytes);

  const auto e1 = vcgan("eval " + q(dir / "step_000006.vckp") + " --config " + q(config) +
                        " --out " + q(work_dir() / "eval"));
  REQUIRE(e1.code == 0);
  CHECK(e1.out.find("f0_transfer=") != std::string::npos);
  CHECK(slurp(work_dir() / "eval" / "eval.txt") == e1.out);
  CHECK(vcgan("eval " + q(dir / "step_000006.vckp") + " --config " + q(config)).out == e1.out);
}

TEST_CASE("convert") {
  const auto& dir = trained_run();
  const auto ckpt_path = dir / "step_000006.vckp";
  const auto config = write_text("small.cfg", kSmallConfig);
  const auto corpus = load_corpus(dir / "corpus.vccp");
  const auto a = work_dir() / "a.wav", c = work_dir() / "c.wav";
  wav_write(corpus.item(0, 0, 0).utterance, a);
  wav_write(corpus.item(0, 2, 1).utterance, c);
  const auto out = work_dir() / "conv" / "d.wav";
  fs::create_directories(out.parent_path());

  const auto args = q(ckpt_path) + " " + q(a) + " " + q(a) + " " + q(c) + " " + q(out) +
                    " --config " + q(config);
  const auto r = vcgan("convert " + args);
  REQUIRE(r.code == 0);
  const auto wav_bytes = slurp(out);
  CHECK(fs::exists(work_dir() / "conv" / "d.pgm"));
  const auto panels = slurp(work_dir() / "conv" / "d_panels.pgm");
  CHECK(panels.rfind("P5\n" + std::to_string(4 * 63 + 3 * 2) + " 48\n255\n", 0) == 0);

  // With a == b the output is the rendering of decode(encode(c)).
  const auto ckpt = load_checkpoint(ckpt_path);
  const auto gen = generator_from(ckpt);
  const auto bank = design_filterbank(ckpt.cqt);
  const auto c_clip = wav_read(c);
  const auto c_spec = analyze(c_clip.samples, bank);
  const Spectrogram* one[] = {&c_spec};
  const auto recon = decode(gen, ckpt.model, encode(gen, ckpt.model, spectrogram_batch(one, ckpt.model)));
  InversionOptions inv;
  inv.iterations = 5;
  inv.signal_length = ckpt.clip_samples;
  auto audio = inverse_cqt(batch_row(recon, 0, ckpt.cqt, c_spec.frames, true), bank, inv);
  double peak = 0.0;
  for (double s : audio.samples) peak = std::max(peak, std::abs(s));
  if (peak > 0.99)
    for (auto& s : audio.samples) s *= 0.99 / peak;
  Utterance expected;
  expected.samples = audio.samples;
  const auto expected_bytes = encode_wav(expected);
  CHECK(wav_bytes == std::string(expected_bytes.begin(), expected_bytes.end()));

  REQUIRE(vcgan("convert " + args).code == 0);
  CHECK(slurp(out) == wav_bytes);

  Utterance fast = corpus.item(0, 0, 0).utterance;
  fast.sample_rate = 16000;
  const auto wrong_rate = work_dir() / "fast.wav";
  wav_write(fast, wrong_rate);
  const auto mismatch = vcgan("convert " + q(ckpt_path) + " " + q(wrong_rate) + " " + q(a) + " " +
                              q(c) + " " + q(out));
  CHECK(mismatch.code == 2);
  CHECK(mismatch.err.find("expected 4000 samples at 8000 Hz") != std::string::npos);
}

TEST_CASE("render") {
  const auto& dir = trained_run();
  const auto img = work_dir() / "item.pgm";
  REQUIRE(vcgan("render " + q(dir / "corpus.vccp") + " " + q(img) + " --item 1,2,0").code == 0);
  const auto corpus = load_corpus(dir / "corpus.vccp");
  const auto expected = encode_pgm(render_spectrogram(corpus.item(1, 2, 0).spectrogram));
  CHECK(slurp(img) == std::string(expected.begin(), expected.end()));

  const auto wav = work_dir() / "item.wav";
  wav_write(corpus.item(1, 2, 0).utterance, wav);
  const auto from_wav = work_dir() / "from_wav.pgm";
  REQUIRE(vcgan("render " + q(wav) + " " + q(from_wav)).code == 0);
  CHECK(slurp(from_wav).rfind("P5\n63 48\n255\n", 0) == 0);

  Utterance tiny;
  tiny.samples.assign(10, 0.1);
  const auto short_wav = work_dir() / "short.wav";
  wav_write(tiny, short_wav);
  CHECK(vcgan("render " + q(short_wav) + " " + q(work_dir() / "short.pgm")).code == 2);
  CHECK(vcgan("render " + q(dir / "corpus.vccp") + " " + q(img) + " --item 5,0,0").code == 2);
}

// Command-line front end: corpus generation, training, conversion,
// evaluation and spectrogram rendering.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "vc/checkpoint.hpp"
#include "vc/corpus.hpp"
#include "vc/pgm.hpp"
#include "vc/run_config.hpp"
#include "vc/trainer.hpp"
#include "vc/wav.hpp"

namespace fs = std::filesystem;
using namespace vc;

namespace {

// Bad arguments or inputs; reported with exit code 2.
class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required) {
  cmd->add_option("--config", c.config_path, "key=value configuration file");
  cmd->add_option("--seed", c.seed, "seed for this command's randomness");
  auto* out = cmd->add_option("--out", c.out, "output directory");
  if (out_required) out->required();
}

RunConfig load_config(const Common& c) {
  return c.config_path.empty() ? RunConfig{} : load_run_config(c.config_path);
}

fs::path prepare_out(const std::string& out) {
  const fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

void echo_config(const RunConfig& cfg, const fs::path& dir) {
  const auto text = cfg.to_text();
  write_file(dir / "config.txt",
             std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Corpus load_corpus_for(const fs::path& path) {
  if (!fs::exists(path)) throw UsageError("corpus not found: " + path.string());
  try {
    return load_corpus(path);
  } catch (const ParseError& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

Checkpoint load_checkpoint_for(const fs::path& path) {
  if (!fs::exists(path)) throw UsageError("checkpoint not found: " + path.string());
  try {
    return load_checkpoint(path);
  } catch (const ParseError& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

Utterance read_clip(const fs::path& path, const Checkpoint& ckpt) {
  Utterance u;
  try {
    u = wav_read(path);
  } catch (const ParseError& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
  if (u.sample_rate != ckpt.cqt.sample_rate || u.samples.size() != ckpt.clip_samples) {
    std::ostringstream msg;
    msg << path.string() << ": expected " << ckpt.clip_samples << " samples at "
        << ckpt.cqt.sample_rate << " Hz, got " << u.samples.size() << " samples at "
        << u.sample_rate << " Hz";
    throw UsageError(msg.str());
  }
  return u;
}

int cmd_gen_data(const Common& common) {
  auto cfg = load_config(common);
  if (common.seed) cfg.corpus.seed = *common.seed;
  cfg.validate();
  const auto dir = prepare_out(common.out);
  const auto corpus = build_corpus(cfg.corpus, cfg.cqt);
  save_corpus(corpus, dir / "corpus.vccp");
  fs::create_directories(dir / "samples");
  for (std::size_t s = 0; s < corpus.n_speakers(); ++s)
    for (std::size_t w = 0; w < corpus.n_words(); ++w)
      wav_write(corpus.item(s, w, 0).utterance,
                dir / "samples" / ("speaker" + std::to_string(s) + "_" + corpus.words[w].name + ".wav"));
  echo_config(cfg, dir);
  std::cout << "wrote " << corpus.items.size() << " utterances (" << corpus.n_speakers()
            << " speakers x " << corpus.n_words() << " words x " << corpus.variants()
            << " variants) to " << (dir / "corpus.vccp").string() << "\n";
  return 0;
}

int cmd_train(const Common& common, const std::string& corpus_arg, const std::string& resume) {
  auto cfg = load_config(common);
  std::optional<Checkpoint> start;
  if (!resume.empty()) {
    start = load_checkpoint_for(resume);
    cfg.train = start->config;
  }
  if (common.seed) {
    if (start) throw UsageError("--seed cannot change a resumed run");
    cfg.train.seed = *common.seed;
  }
  const auto dir = prepare_out(common.out);
  if (!corpus_arg.empty()) cfg.train.corpus_path = corpus_arg;
  else if (cfg.train.corpus_path.empty()) cfg.train.corpus_path = (dir / "corpus.vccp").string();
  if (start) start->config.corpus_path = cfg.train.corpus_path;
  cfg.validate();
  const auto corpus = load_corpus_for(cfg.train.corpus_path);
  echo_config(cfg, dir);

  auto trainer = start ? Trainer(*start, corpus) : Trainer(cfg.train, corpus);
  TrainOutputs outputs;
  outputs.directory = dir;
  const auto interval = cfg.log_interval;
  outputs.on_step = [interval](const MetricsRecord& r) {
    if (r.step % interval != 0) return;
    std::printf("step %llu  analogy %.4f  disc %.4f  gen_adv %.4f  real_acc %.3f  fake_det %.3f  %.1fs\n",
                static_cast<unsigned long long>(r.step), r.analogy_loss, r.disc_loss,
                r.gen_adv_loss, r.disc_real_accuracy, r.disc_fake_detection_rate, r.wall_time);
    std::fflush(stdout);
  };
  const auto final = train(trainer, outputs);
  std::cout << "final checkpoint " << checkpoint_path(dir, final.step).string() << "\n";
  return 0;
}

int cmd_convert(const Common& common, const std::string& ckpt_path, const std::string& a,
                const std::string& b, const std::string& c, const std::string& d_out) {
  auto cfg = load_config(common);
  if (common.seed) cfg.inversion_seed = *common.seed;
  cfg.validate();
  const auto ckpt = load_checkpoint_for(ckpt_path);
  const auto bank = design_filterbank(ckpt.cqt);
  std::vector<Spectrogram> inputs;
  for (const auto& p : {a, b, c}) {
    const auto clip = read_clip(p, ckpt);
    inputs.push_back(analyze(clip.samples, bank));
  }
  const auto generator = generator_from(ckpt);
  auto batch = [&](const Spectrogram& s) {
    const Spectrogram* one[] = {&s};
    return spectrogram_batch(one, ckpt.model);
  };
  const auto predicted =
      generator_forward(generator, ckpt.model, batch(inputs[0]), batch(inputs[1]), batch(inputs[2]));
  const auto output = batch_row(predicted, 0, ckpt.cqt, inputs[0].frames, true);

  InversionOptions inv;
  inv.iterations = cfg.inversion_iterations;
  inv.seed = cfg.inversion_seed;
  inv.signal_length = ckpt.clip_samples;
  auto audio = inverse_cqt(output, bank, inv);
  double peak = 0.0;
  for (double s : audio.samples) peak = std::max(peak, std::abs(s));
  if (peak > 0.99)
    for (auto& s : audio.samples) s *= 0.99 / peak;
  Utterance u;
  u.samples = std::move(audio.samples);
  u.sample_rate = ckpt.cqt.sample_rate;

  const fs::path d_path(d_out);
  const fs::path image_dir = common.out.empty() ? d_path.parent_path() : prepare_out(common.out);
  if (!image_dir.empty()) fs::create_directories(image_dir);
  wav_write(u, d_path);
  const auto stem = d_path.stem().string();
  write_pgm(render_spectrogram(output), image_dir / (stem + ".pgm"));
  inputs.push_back(output);
  write_pgm(render_panels(inputs), image_dir / (stem + "_panels.pgm"));
  if (!common.out.empty()) echo_config(cfg, image_dir);

  std::cout << "wrote " << d_path.string() << " (phase recovery error "
            << audio.error_history.back() << ")\n";
  if (const auto f0 = estimate_f0(output)) std::cout << "estimated f0 " << *f0 << " Hz\n";
  return 0;
}

int cmd_eval(const Common& common, const std::string& ckpt_path, const std::string& corpus_arg) {
  auto cfg = load_config(common);
  if (common.seed) cfg.eval.seed = *common.seed;
  cfg.validate();
  const auto ckpt = load_checkpoint_for(ckpt_path);
  const auto corpus = load_corpus_for(corpus_arg.empty() ? ckpt.config.corpus_path : corpus_arg);
  const auto report = evaluate(ckpt, corpus, cfg.eval);
  std::cout << report.to_text();
  if (!common.out.empty()) {
    const auto dir = prepare_out(common.out);
    const auto text = report.to_text();
    write_file(dir / "eval.txt",
               std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    echo_config(cfg, dir);
  }
  return 0;
}

int cmd_render(const Common& common, const std::string& source, const std::string& out,
               const std::vector<std::size_t>& item) {
  auto cfg = load_config(common);
  cfg.validate();
  Spectrogram spec;
  const fs::path src(source);
  if (src.extension() == ".vccp") {
    const auto corpus = load_corpus_for(src);
    if (item.size() != 3) throw UsageError("--item takes speaker,word,variant");
    if (item[0] >= corpus.n_speakers() || item[1] >= corpus.n_words() || item[2] >= corpus.variants())
      throw UsageError("--item is outside the corpus");
    spec = corpus.item(item[0], item[1], item[2]).spectrogram;
  } else {
    Utterance u;
    try {
      u = wav_read(src);
    } catch (const ParseError& e) {
      throw UsageError(source + ": " + e.what());
    }
    if (u.sample_rate != cfg.cqt.sample_rate)
      throw UsageError(source + ": sample rate " + std::to_string(u.sample_rate) +
                       " Hz does not match cqt.sample_rate " + std::to_string(cfg.cqt.sample_rate));
    const auto bank = design_filterbank(cfg.cqt);
    if (u.samples.size() < bank.longest_window())
      throw UsageError(source + ": empty spectrogram (clip shorter than the longest CQT window, " +
                       std::to_string(bank.longest_window()) + " samples)");
    spec = analyze(u.samples, bank);
  }
  write_pgm(render_spectrogram(spec), out);
  std::cout << "wrote " << out << " (" << spec.frames << " x " << spec.bins << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Voice conversion with constant-Q analogies and a conditional GAN"};
  app.require_subcommand(1);

  Common gen_common, train_common, convert_common, eval_common, render_common;
  std::string train_corpus, resume, eval_corpus, eval_ckpt;
  std::string conv_ckpt, conv_a, conv_b, conv_c, conv_d;
  std::string render_source, render_out;
  std::vector<std::size_t> render_item{0, 0, 0};

  auto* gen = app.add_subcommand("gen-data", "synthesize the corpus and sample WAVs");
  add_common(gen, gen_common, true);

  auto* tr = app.add_subcommand("train", "run alternating minimax training");
  add_common(tr, train_common, true);
  tr->add_option("--corpus", train_corpus, "corpus file (default: <out>/corpus.vccp)");
  tr->add_option("--resume", resume, "continue from a checkpoint");

  auto* conv = app.add_subcommand("convert", "generate d from a, b, c and render it to audio");
  add_common(conv, convert_common, false);
  conv->add_option("checkpoint", conv_ckpt)->required();
  conv->add_option("a", conv_a)->required();
  conv->add_option("b", conv_b)->required();
  conv->add_option("c", conv_c)->required();
  conv->add_option("d", conv_d, "output WAV")->required();

  auto* ev = app.add_subcommand("eval", "score a checkpoint on held-out quadruples");
  add_common(ev, eval_common, false);
  ev->add_option("checkpoint", eval_ckpt)->required();
  ev->add_option("--corpus", eval_corpus, "corpus file (default: the one used in training)");

  auto* rd = app.add_subcommand("render", "write a spectrogram as a PGM image");
  add_common(rd, render_common, false);
  rd->add_option("source", render_source, "WAV file or corpus (.vccp)")->required();
  rd->add_option("image", render_out, "output .pgm")->required();
  rd->add_option("--item", render_item, "speaker word variant, for corpus sources")
      ->expected(3)
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) return cmd_gen_data(gen_common);
    if (*tr) return cmd_train(train_common, train_corpus, resume);
    if (*conv) return cmd_convert(convert_common, conv_ckpt, conv_a, conv_b, conv_c, conv_d);
    if (*ev) return cmd_eval(eval_common, eval_ckpt, eval_corpus);
    if (*rd) return cmd_render(render_common, render_source, render_out, render_item);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

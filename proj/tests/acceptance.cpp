// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "vc/analogy_gan.hpp"
#include "vc/gradcheck.hpp"
#include "vc/trainer.hpp"

using namespace vc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

const Corpus& default_corpus() {
  static const Corpus corpus = build_corpus(CorpusParams{}, CqtConfig{});
  return corpus;
}

// ---------------------------------------------------------------- 1

ModelConfig toy_model(TransformVariant variant) {
  ModelConfig c;
  c.bins = 8;
  c.frames = 8;
  c.latent = 6;
  c.channels1 = 2;
  c.channels2 = 3;
  c.hidden = 5;
  c.transform = variant;
  return c;
}

void randomize(const std::vector<Tensor>& params, std::mt19937_64& rng) {
  for (auto t : params) {
    const auto v = oracle::random_values(t.size(), rng, -0.5, 0.5);
    std::copy(v.begin(), v.end(), t.mutable_data().begin());
  }
}

Outcome gradient_correctness() {
  std::mt19937_64 rng(101);
  auto R = [&](Shape s, bool grad = true) { return oracle::random_tensor(std::move(s), rng, grad); };
  // Projects an op's output onto fixed random weights.
  auto project = [&](const Tensor& y) {
    const auto w = Tensor(y.shape(), oracle::random_values(y.size(), rng));
    return [w](const Tensor& out) { return sum(out * w); };
  };

  struct Check {
    std::string name;
    std::function<Tensor()> loss;
    std::vector<Tensor> params;
  };
  std::vector<Check> checks;
  auto op_check = [&](std::string name, std::function<Tensor()> f, std::vector<Tensor> params) {
    const auto p = project(f());
    checks.push_back({std::move(name), [f, p] { return p(f()); }, std::move(params)});
  };

  {
    auto a = R({3, 4}), b = R({4});
    op_check("add", [=] { return add(a, b); }, {a, b});
  }
  {
    auto a = R({2, 3, 4}), b = R({3, 1});
    op_check("sub", [=] { return sub(a, b); }, {a, b});
  }
  {
    auto a = R({2, 3, 4}), b = R({2, 3, 4});
    op_check("mul", [=] { return mul(a, b); }, {a, b});
    auto c = R({4});
    op_check("mul_broadcast", [=] { return mul(a, c); }, {a, c});
    op_check("scale", [=] { return scale(a, -1.7); }, {a});
    op_check("reshape", [=] { return reshape(a, {6, 4}); }, {a});
    checks.push_back({"sum", [=] { return sum(a); }, {a}});
  }
  {
    auto a = R({3, 2}), b = R({3, 5});
    op_check("concat_columns", [=] { return concat_columns(a, b); }, {a, b});
  }
  {
    auto a = R({3, 4}), b = R({4, 5}), bias = R({5});
    op_check("matmul", [=] { return matmul(a, b); }, {a, b});
    op_check("linear", [=] { return linear(a, b, bias); }, {a, b, bias});
  }
  {
    auto x = R({2, 2, 7, 6}), k = R({3, 2, 3, 2}), bias = R({3});
    op_check("conv2d", [=] { return conv2d(x, k, bias, {2, 1}); }, {x, k, bias});
    auto x1 = R({2, 5, 5}), k1 = R({2, 2, 3, 3});
    op_check("conv2d_nobias", [=] { return conv2d(x1, k1, {1, 0}); }, {x1, k1});
    auto y = R({2, 3, 4, 3}), kt = R({3, 2, 3, 3}), bt = R({2});
    op_check("conv2d_transpose", [=] { return conv2d_transpose(y, kt, bt, {2, 1}, 1); }, {y, kt, bt});
  }
  {
    auto x = R({4, 5});
    op_check("relu", [=] { return relu(x); }, {x});
    op_check("tanh", [=] { return vc::tanh(x); }, {x});
    op_check("sigmoid", [=] { return sigmoid(x); }, {x});
    op_check("leaky_relu", [=] { return leaky_relu(x, 0.2); }, {x});
    const std::vector<std::size_t> targets{0, 4, 2, 1};
    checks.push_back({"softmax_cross_entropy", [=] { return softmax_cross_entropy(x, targets); }, {x}});
    auto t = R({4, 5}, false);
    checks.push_back({"mse_loss", [=] { return mse_loss(x, t, 4); }, {x}});
  }
  for (auto variant : {TransformVariant::additive, TransformVariant::deep}) {
    const auto cfg = toy_model(variant);
    Rng init(7);
    const auto gen = init_generator(cfg, init);
    const auto disc = init_discriminator(cfg, init);
    randomize(gen.tensors(), rng);
    randomize(disc.tensors(), rng);
    const auto a = R({2, 8, 8}, false), b = R({2, 8, 8}, false), c = R({2, 8, 8}, false),
               d = R({2, 8, 8}, false);
    const std::vector<std::size_t> targets{2, 5}, classes{1, 7};
    const auto v = to_string(variant);
    checks.push_back({"generator_total_loss/" + v,
                      [=] {
                        const auto out = generator_forward(gen, cfg, a, b, c);
                        return generator_total_loss(analogy_loss(out, d),
                                                    generator_adversarial_loss(disc, cfg, out, targets),
                                                    0.05);
                      },
                      gen.tensors()});
    checks.push_back({"discriminator_loss/" + v,
                      [=] { return discriminator_loss(disc, cfg, a, classes, b).loss; },
                      disc.tensors()});
  }

  double worst = 0.0;
  std::string worst_name;
  std::size_t coords = 0;
  for (const auto& chk : checks) {
    const auto r = gradient_check(chk.loss, chk.params);
    coords += r.coords_checked;
    if (r.max_relative_error >= worst) worst = r.max_relative_error, worst_name = chk.name;
  }
  return {worst < 1e-4, std::to_string(checks.size()) + " checks, " + std::to_string(coords) +
                            " coordinates, worst rel err " + fmt("%.2e", worst) + " (" +
                            worst_name + ") < 1e-4"};
}

// ---------------------------------------------------------------- 2

Outcome convolution_oracle() {
  std::mt19937_64 rng(202);
  double worst_fwd = 0.0, worst_adj = 0.0;
  std::size_t shapes = 0;
  for (std::size_t ci = 1; ci <= 2; ++ci)
    for (std::size_t co = 1; co <= 2; ++co)
      for (std::size_t h = 1; h <= 8; ++h)
        for (std::size_t w = 1; w <= 8; ++w)
          for (std::size_t kh = 1; kh <= 3; ++kh)
            for (std::size_t kw = 1; kw <= 3; ++kw)
              for (std::size_t s = 1; s <= 2; ++s)
                for (std::size_t p = 0; p <= 1; ++p) {
                  if (h + 2 * p < kh || w + 2 * p < kw) continue;
                  ++shapes;
                  const auto x = oracle::random_tensor({ci, h, w}, rng);
                  const auto k = oracle::random_tensor({co, ci, kh, kw}, rng);
                  const auto y = conv2d(x, k, {s, p});
                  std::size_t oh = 0, ow = 0;
                  const auto ref = oracle::conv2d_brute(x.to_vector(), ci, h, w, k.to_vector(), co,
                                                        kh, kw, s, p, oh, ow);
                  if (y.shape() != Shape{co, oh, ow}) return {false, "shape mismatch"};
                  for (std::size_t i = 0; i < ref.size(); ++i)
                    worst_fwd = std::max(worst_fwd, std::abs(y[i] - ref[i]));

                  const auto g = oracle::random_tensor(y.shape(), rng);
                  const OutputPadding op{(h + 2 * p - kh) % s, (w + 2 * p - kw) % s};
                  const auto t = conv2d_transpose(g, k, {s, p}, op);
                  if (t.shape() != x.shape()) return {false, "transpose shape mismatch"};
                  worst_adj = std::max(
                      worst_adj, std::abs(oracle::dot(y.data(), g.data()) - oracle::dot(x.data(), t.data())));
                }
  return {worst_fwd <= 1e-12 && worst_adj <= 1e-10,
          std::to_string(shapes) + " shapes, forward max err " + fmt("%.2e", worst_fwd) +
              " (<= 1e-12), adjoint max err " + fmt("%.2e", worst_adj) + " (<= 1e-10)"};
}

// ---------------------------------------------------------------- 3

Outcome cqt_invariants() {
  const CqtConfig cqt;
  const auto bank = design_filterbank(cqt);
  bool doubling = true;
  for (std::size_t k = 0; k + cqt.bins_per_octave < cqt.n_bins; ++k)
    doubling = doubling && cqt.center_frequency(k + cqt.bins_per_octave) == 2.0 * cqt.center_frequency(k);

  double q_dev = 0.0;
  for (const auto& kern : bank.kernels) {
    const double q_eff = kern.center_frequency * static_cast<double>(kern.window_length) /
                         (cqt.sample_rate * cqt.q_scale);
    q_dev = std::max(q_dev, std::abs(q_eff / cqt.quality() - 1.0));
  }

  std::size_t argmax_ok = 0;
  const std::size_t length = 4000;
  for (std::size_t k = 0; k < cqt.n_bins; ++k) {
    std::vector<double> tone(length);
    for (std::size_t n = 0; n < length; ++n)
      tone[n] = 0.5 * std::sin(2 * std::numbers::pi * cqt.center_frequency(k) * n / cqt.sample_rate);
    const auto spec = analyze(tone, bank);
    const auto t = spec.frames / 2;
    std::size_t best = 0;
    for (std::size_t j = 0; j < spec.bins; ++j)
      if (spec.at(j, t) > spec.at(best, t)) best = j;
    argmax_ok += best == k;
  }

  std::mt19937_64 rng(303);
  const auto x = oracle::random_values(length, rng), y = oracle::random_values(length, rng);
  const double alpha = 0.7, beta = -1.3;
  std::vector<double> mix(length);
  for (std::size_t n = 0; n < length; ++n) mix[n] = alpha * x[n] + beta * y[n];
  const auto fx = forward_cqt(x, bank), fy = forward_cqt(y, bank), fm = forward_cqt(mix, bank);
  double lin = 0.0;
  for (std::size_t i = 0; i < fm.values.size(); ++i)
    lin = std::max(lin, std::abs(fm.values[i] - (alpha * fx.values[i] + beta * fy.values[i])));

  const bool pass = doubling && q_dev < 0.02 && argmax_ok == cqt.n_bins && lin <= 1e-10;
  return {pass, std::string("octave doubling ") + (doubling ? "exact" : "INEXACT") +
                    ", Q deviation " + fmt("%.2f%%", 100 * q_dev) + " (< 2%), tone argmax " +
                    std::to_string(argmax_ok) + "/" + std::to_string(cqt.n_bins) +
                    " bins, linearity err " + fmt("%.2e", lin) + " (<= 1e-10)"};
}

// ---------------------------------------------------------------- 4

Outcome inversion_round_trip() {
  const auto& corpus = default_corpus();
  const auto bank = design_filterbank(corpus.cqt);
  double worst = 0.0;
  bool monotone = true;
  std::size_t clips = 0;
  for (std::size_t s = 0; s < corpus.n_speakers(); ++s)
    for (std::size_t w = 0; w < corpus.n_words(); w += 3) {
      const auto& item = corpus.item(s, w, 0);
      InversionOptions opts;
      opts.iterations = 50;
      opts.seed = 11;
      opts.signal_length = item.utterance.samples.size();
      const auto inv = inverse_cqt(item.spectrogram, bank, opts);
      for (std::size_t i = 1; i < inv.error_history.size(); ++i)
        monotone = monotone && inv.error_history[i] <= inv.error_history[i - 1] * (1 + 1e-12);
      // Independent re-analysis of the recovered audio.
      const auto target = decompress(item.spectrogram);
      const auto again = decompress(analyze(inv.samples, bank));
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < target.size(); ++i) {
        num += (again[i] - target[i]) * (again[i] - target[i]);
        den += target[i] * target[i];
      }
      worst = std::max(worst, std::sqrt(num / den));
      ++clips;
    }
  return {worst < 0.15 && monotone,
          std::to_string(clips) + " harmonic utterances, worst relative magnitude error " +
              fmt("%.4f", worst) + " (< 0.15), error history " +
              (monotone ? "non-increasing" : "NOT monotone")};
}

// ---------------------------------------------------------------- 5

Outcome analogy_identity() {
  const auto& corpus = default_corpus();
  const auto model = model_config_for(corpus, TransformVariant::additive);
  Rng init(5);
  const auto gen = init_generator(model, init);
  Rng rng(6);
  std::size_t identical = 0, trials = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    const auto q = sample_quadruple(corpus, rng);
    const Spectrogram* as[] = {q.a};
    const Spectrogram* cs[] = {q.c};
    const auto a = spectrogram_batch(as, model), c = spectrogram_batch(cs, model);
    const auto out = generator_forward(gen, model, a, a, c);
    const auto ref = decode(gen, model, encode(gen, model, c));
    identical += out.to_vector() == ref.to_vector();
    ++trials;
  }
  return {identical == trials, std::to_string(identical) + "/" + std::to_string(trials) +
                                   " corpus analogies bit-identical to decode(encode(c))"};
}

// ---------------------------------------------------------------- 6

Outcome minimax_baselines() {
  const auto& corpus = default_corpus();
  const auto model = model_config_for(corpus, TransformVariant::additive);
  Rng init(8);
  const auto gen = init_generator(model, init);
  const auto disc = init_discriminator(model, init);
  Rng rng(9);
  const auto batch = make_batch(corpus, model, gen, rng, 16, {0, corpus.variants()});
  const auto out = discriminator_loss(disc, model, spectrogram_batch(batch.real, model),
                                      batch.real_classes, batch.generated);
  const double loss_err = std::abs(out.loss.item() - std::log(static_cast<double>(model.n_classes())));

  const std::size_t samples = 1000;
  const auto big = make_batch(corpus, model, gen, rng, 2 * samples, {0, corpus.variants()}, false);
  const auto logits = discriminator_forward(disc, model, spectrogram_batch(big.real, model));
  Rng tie(10);
  std::size_t correct = 0;
  const auto values = logits.data();
  const auto C = model.n_classes();
  for (std::size_t i = 0; i < samples; ++i)
    correct += predict_class(values.subspan(i * C, C), &tie) == big.real_classes[i];
  const double acc = static_cast<double>(correct) / samples;
  const double p = 1.0 / static_cast<double>(C), sigma = std::sqrt(p * (1 - p) / samples);
  return {loss_err <= 1e-9 && std::abs(acc - p) <= 3 * sigma,
          "zero-head loss - ln(" + std::to_string(C) + ") = " + fmt("%.1e", loss_err) +
              " (<= 1e-9), real accuracy " + fmt("%.3f", acc) + " over 1000 vs chance " +
              fmt("%.3f", p) + " +- " + fmt("%.3f", 3 * sigma)};
}

// ---------------------------------------------------------------- 7

struct RunSummary {
  double first100 = 0.0, last100 = 0.0, last100_disc_acc = 0.0;
  EvaluationReport report;
  double seconds = 0.0;
};

RunSummary desk_run(double lambda, std::size_t steps) {
  TrainConfig cfg;
  cfg.steps = steps;
  cfg.lambda = lambda;
  Trainer trainer(cfg, default_corpus());
  RunSummary s;
  TrainOutputs out;
  out.on_step = [&](const MetricsRecord& r) {
    if (r.step <= 100) s.first100 += r.analogy_loss / 100;
    if (r.step > steps - 100) {
      s.last100 += r.analogy_loss / 100;
      s.last100_disc_acc += r.disc_real_accuracy / 100;
    }
    s.seconds = r.wall_time;
  };
  const auto final = train(trainer, out);
  s.report = evaluate(final, default_corpus());
  return s;
}

Outcome desk_training() {
  const std::size_t steps = 2000;
  const auto& corpus = default_corpus();
  TrainConfig base_cfg;
  const Trainer untrained(base_cfg, corpus);
  const auto baseline = evaluate(untrained.checkpoint(), corpus);
  const auto run = desk_run(base_cfg.lambda, steps);
  const auto ablation = desk_run(0.0, steps);

  const double chance = 1.0 / 9.0;
  const bool loss_ok = run.last100 < 0.5 * run.first100;
  const bool disc_ok = run.report.disc_accuracy > 3 * chance;
  const bool f0_ok = run.report.f0_transfer >= 0.8 && run.report.f0_transfer > baseline.f0_transfer;
  std::ostringstream d;
  d << steps << " steps in " << fmt("%.0f", run.seconds) << " s; analogy loss "
    << fmt("%.1f", run.first100) << " -> " << fmt("%.1f", run.last100) << " (< 50%)"
    << "; held-out disc accuracy " << fmt("%.3f", run.report.disc_accuracy) << " (> 3x chance)"
    << "; f0-transfer " << fmt("%.3f", run.report.f0_transfer) << " (>= 0.8, untrained "
    << fmt("%.3f", baseline.f0_transfer) << "); lambda=0 ablation: loss "
    << fmt("%.1f", ablation.last100) << ", f0-transfer " << fmt("%.3f", ablation.report.f0_transfer)
    << ", disc accuracy " << fmt("%.3f", ablation.report.disc_accuracy);
  return {loss_ok && disc_ok && f0_ok, d.str()};
}

// ---------------------------------------------------------------- 8

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism_and_persistence() {
  const auto& corpus = default_corpus();
  TrainConfig cfg;
  cfg.steps = 60;
  cfg.checkpoint_interval = 15;
  const auto root = fs::temp_directory_path() / "vc_acceptance_determinism";
  fs::remove_all(root);

  auto run = [&](const fs::path& dir) {
    Trainer t(cfg, corpus);
    return train(t, {dir, {}});
  };
  run(root / "a");
  run(root / "b");
  const auto log = slurp(root / "a" / "metrics.tsv");
  const bool logs_equal = log == slurp(root / "b" / "metrics.tsv");
  const auto final_bytes = slurp(checkpoint_path(root / "a", cfg.steps));

  std::size_t resumes_ok = 0, resaves_ok = 0, resumes = 0;
  for (std::uint64_t at = 15; at < cfg.steps; at += 15) {
    ++resumes;
    const auto dir = root / ("resume_" + std::to_string(at));
    fs::copy(root / "a", dir);
    const auto ckpt_file = checkpoint_path(dir, at);
    const auto ckpt = load_checkpoint(ckpt_file);
    const auto bytes = serialize_checkpoint(ckpt);
    resaves_ok += std::string(bytes.begin(), bytes.end()) == slurp(ckpt_file);
    Trainer t(ckpt, corpus);
    train(t, {dir, {}});
    resumes_ok += slurp(dir / "metrics.tsv") == log &&
                  slurp(checkpoint_path(dir, cfg.steps)) == final_bytes;
  }
  fs::remove_all(root);
  return {logs_equal && resumes_ok == resumes && resaves_ok == resumes,
          std::string("metrics logs ") + (logs_equal ? "byte-identical" : "DIFFER") + ", resume " +
              std::to_string(resumes_ok) + "/" + std::to_string(resumes) +
              " reproduce the uninterrupted run, re-save " + std::to_string(resaves_ok) + "/" +
              std::to_string(resumes) + " byte-identical"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradient_correctness},
      {"convolution oracle", convolution_oracle},
      {"CQT invariants", cqt_invariants},
      {"inversion round trip", inversion_round_trip},
      {"analogy identity", analogy_identity},
      {"minimax baselines", minimax_baselines},
      {"desk-scale training", desk_training},
      {"determinism and persistence", determinism_and_persistence},
  };
  std::set<std::size_t> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoul(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected.empty() && !selected.count(i + 1)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] %zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}

#include "vc/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "vc/keyvalue.hpp"

namespace vc {

namespace {

Tensor stack(const std::vector<AnalogyQuadruple>& quads, const ModelConfig& model,
             const Spectrogram* AnalogyQuadruple::*member) {
  std::vector<const Spectrogram*> specs;
  specs.reserve(quads.size());
  for (const auto& q : quads) specs.push_back(q.*member);
  return spectrogram_batch(specs, model);
}

std::string rng_text(const Rng& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

Rng rng_from_text(const std::string& text) {
  Rng rng;
  std::istringstream in(text);
  in >> rng;
  if (!in) throw ParseError("checkpoint: malformed random generator state", 0);
  return rng;
}

GeneratorParams fresh_generator(const ModelConfig& model, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 1));
  return init_generator(model, rng);
}

DiscriminatorParams fresh_discriminator(const ModelConfig& model, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 2));
  return init_discriminator(model, rng);
}

const TrainConfig& validated(const TrainConfig& config) {
  config.validate();
  return config;
}

ModelConfig checked_model(const Checkpoint& c, const Corpus& corpus) {
  const auto expected = model_config_for(corpus, c.config.transform);
  if (!(c.model == expected) || !(c.cqt == corpus.cqt) ||
      c.clip_samples != corpus.items.front().utterance.samples.size())
    throw ConfigError("checkpoint model geometry does not match the corpus");
  return c.model;
}

double fraction(std::size_t hits, std::size_t total) {
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace

ModelConfig model_config_for(const Corpus& corpus, TransformVariant transform) {
  if (corpus.items.empty()) throw ConfigError("corpus is empty");
  ModelConfig m;
  m.bins = corpus.cqt.n_bins;
  m.frames = (corpus.items.front().spectrogram.frames + 3) / 4 * 4;
  m.n_words = corpus.n_words();
  m.n_speakers = corpus.n_speakers();
  m.transform = transform;
  m.validate();
  return m;
}

VariantRange training_variants(const Corpus& corpus, const TrainConfig& config) {
  if (config.held_out_variants >= corpus.variants())
    throw ConfigError("held_out_variants (" + std::to_string(config.held_out_variants) +
                      ") leaves no training variants in a corpus with " +
                      std::to_string(corpus.variants()) + " per cell");
  return {0, corpus.variants() - config.held_out_variants};
}

VariantRange held_out_variants(const Corpus& corpus, const TrainConfig& config) {
  const auto train = training_variants(corpus, config);
  return {train.end, corpus.variants()};
}

Batch make_batch(const Corpus& corpus, const ModelConfig& model, const GeneratorParams& generator,
                 Rng& rng, std::size_t batch_size, VariantRange variants, bool with_generated) {
  if (batch_size < 2 || batch_size % 2 != 0)
    throw ConfigError("batch_size must be even and at least 2");
  if (variants.end <= variants.begin || variants.end > corpus.variants())
    throw ConfigError("make_batch: empty or out-of-range variant range");
  const auto half = batch_size / 2;
  Batch b;
  for (std::size_t i = 0; i < half; ++i) {
    const auto s = uniform_index(rng, corpus.n_speakers());
    const auto w = uniform_index(rng, corpus.n_words());
    const auto v = variants.begin + uniform_index(rng, variants.end - variants.begin);
    b.real.push_back(&corpus.item(s, w, v).spectrogram);
    b.real_classes.push_back(model.class_of(w, s));
  }
  for (std::size_t i = 0; i < half; ++i) {
    auto q = sample_quadruple(corpus, rng, variants);
    b.target_classes.push_back(model.class_of(q.labels[3].word, q.labels[3].speaker));
    b.quadruples.push_back(q);
  }
  if (with_generated) {
    b.generated = generator_forward(generator, model, stack(b.quadruples, model, &AnalogyQuadruple::a),
                                    stack(b.quadruples, model, &AnalogyQuadruple::b),
                                    stack(b.quadruples, model, &AnalogyQuadruple::c))
                      .detach();
  }
  return b;
}

std::string metrics_header() {
  return "step\tanalogy_loss\tdisc_loss\tgen_adv_loss\tdisc_real_accuracy\tdisc_fake_detection_rate";
}

std::string format_metrics(const MetricsRecord& r) {
  return std::to_string(r.step) + '\t' + format_double(r.analogy_loss) + '\t' +
         format_double(r.disc_loss) + '\t' + format_double(r.gen_adv_loss) + '\t' +
         format_double(r.disc_real_accuracy) + '\t' + format_double(r.disc_fake_detection_rate);
}

Trainer::Trainer(TrainConfig config, const Corpus& corpus)
    : config_(validated(config)),
      corpus_(corpus),
      model_(model_config_for(corpus, config.transform)),
      generator_(fresh_generator(model_, config.seed)),
      discriminator_(fresh_discriminator(model_, config.seed)),
      generator_opt_(config.generator_optimizer, generator_.tensors()),
      discriminator_opt_(config.discriminator_optimizer, discriminator_.tensors()),
      rng_(mix_seed(config.seed, 3)),
      tie_rng_(mix_seed(config.seed, 4)) {
  training_variants(corpus_, config_);
}

Trainer::Trainer(const Checkpoint& c, const Corpus& corpus)
    : config_(validated(c.config)),
      corpus_(corpus),
      model_(checked_model(c, corpus)),
      generator_(generator_from(c)),
      discriminator_(discriminator_from(c)),
      generator_opt_(c.config.generator_optimizer, generator_.tensors()),
      discriminator_opt_(c.config.discriminator_optimizer, discriminator_.tensors()),
      rng_(rng_from_text(c.rng_state)),
      tie_rng_(rng_from_text(c.tie_rng_state)),
      step_(c.step) {
  training_variants(corpus_, config_);
  generator_opt_.restore(c.generator_optimizer);
  discriminator_opt_.restore(c.discriminator_optimizer);
}

Batch Trainer::next_batch(bool with_generated) {
  return make_batch(corpus_, model_, generator_, rng_, config_.batch_size,
                    training_variants(corpus_, config_), with_generated);
}

void Trainer::check_finite(double value, const char* term) const {
  if (!std::isfinite(value))
    throw TrainingError("non-finite " + std::string(term) + " (" + format_double(value) +
                        ") at step " + std::to_string(step_ + 1));
}

DiscStepMetrics Trainer::disc_step(const Batch& batch) {
  if (!batch.generated.defined())
    throw ContractError("disc_step: batch has no generated half");
  const auto real = spectrogram_batch(batch.real, model_);
  const auto out =
      discriminator_loss(discriminator_, model_, real, batch.real_classes, batch.generated);
  DiscStepMetrics m;
  m.loss = out.loss.item();
  check_finite(m.loss, "disc_loss");

  const auto classes = model_.n_classes();
  const auto real_logits = out.real_logits.data();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < batch.real.size(); ++i)
    correct += predict_class(real_logits.subspan(i * classes, classes), &tie_rng_) ==
               batch.real_classes[i];
  const auto gen_logits = out.generated_logits.data();
  const auto n_gen = batch.generated.dim(0);
  std::size_t detected = 0;
  for (std::size_t i = 0; i < n_gen; ++i)
    detected += predict_class(gen_logits.subspan(i * classes, classes), &tie_rng_) ==
                model_.fake_class();
  m.real_accuracy = fraction(correct, batch.real.size());
  m.fake_detection = fraction(detected, n_gen);

  out.loss.backward();
  discriminator_opt_.step();
  return m;
}

GenStepMetrics Trainer::gen_step(const Batch& batch) {
  const auto& q = batch.quadruples;
  if (q.empty()) throw ContractError("gen_step: batch has no quadruples");
  const auto predicted = generator_forward(generator_, model_, stack(q, model_, &AnalogyQuadruple::a),
                                           stack(q, model_, &AnalogyQuadruple::b),
                                           stack(q, model_, &AnalogyQuadruple::c));
  const auto analogy = analogy_loss(predicted, stack(q, model_, &AnalogyQuadruple::d));
  const auto adversarial =
      generator_adversarial_loss(discriminator_, model_, predicted, batch.target_classes);
  const auto total = generator_total_loss(analogy, adversarial, config_.lambda);
  GenStepMetrics m{analogy.item(), adversarial.item(), total.item()};
  check_finite(m.analogy_loss, "analogy_loss");
  check_finite(m.adversarial_loss, "gen_adv_loss");
  check_finite(m.total_loss, "generator_total_loss");
  total.backward();
  generator_opt_.step();
  return m;
}

MetricsRecord Trainer::step() {
  DiscStepMetrics d;
  for (std::size_t k = 0; k < config_.disc_steps_per_gen_step; ++k) d = disc_step(next_batch(true));
  const auto g = gen_step(next_batch(false));
  ++step_;
  MetricsRecord r;
  r.step = step_;
  r.analogy_loss = g.analogy_loss;
  r.disc_loss = d.loss;
  r.gen_adv_loss = g.adversarial_loss;
  r.disc_real_accuracy = d.real_accuracy;
  r.disc_fake_detection_rate = d.fake_detection;
  return r;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.config = config_;
  c.model = model_;
  c.cqt = corpus_.cqt;
  c.clip_samples = corpus_.items.front().utterance.samples.size();
  c.step = step_;
  c.tensors = snapshot_tensors(generator_.named());
  for (auto& t : snapshot_tensors(discriminator_.named())) c.tensors.push_back(std::move(t));
  c.generator_optimizer = generator_opt_.state();
  c.discriminator_optimizer = discriminator_opt_.state();
  c.rng_state = rng_text(rng_);
  c.tie_rng_state = rng_text(tie_rng_);
  return c;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& directory, std::uint64_t step) {
  char name[32];
  std::snprintf(name, sizeof name, "step_%06llu.vckp", static_cast<unsigned long long>(step));
  return directory / name;
}

Checkpoint train(Trainer& trainer, const TrainOutputs& outputs) {
  const auto& config = trainer.config();
  const bool files = !outputs.directory.empty();
  std::ofstream log;
  if (files) {
    std::filesystem::create_directories(outputs.directory);
    const auto log_path = outputs.directory / "metrics.tsv";
    // Keep the header and the records up to the resume point.
    std::vector<std::string> kept{metrics_header()};
    if (trainer.completed_steps() > 0) {
      std::ifstream in(log_path);
      std::string line;
      std::getline(in, line);
      while (kept.size() <= trainer.completed_steps() && std::getline(in, line))
        kept.push_back(line);
    }
    log.open(log_path, std::ios::trunc);
    if (!log) throw IoError("cannot open " + log_path.string() + " for writing");
    for (const auto& line : kept) log << line << '\n';
  }

  const auto start = std::chrono::steady_clock::now();
  bool saved_last = false;
  while (trainer.completed_steps() < config.steps) {
    auto record = trainer.step();
    record.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    saved_last = false;
    if (files) {
      log << format_metrics(record) << '\n';
      log.flush();
      if (config.checkpoint_interval != 0 && record.step % config.checkpoint_interval == 0) {
        save_checkpoint(trainer.checkpoint(), checkpoint_path(outputs.directory, record.step));
        saved_last = true;
      }
    }
    if (outputs.on_step) outputs.on_step(record);
  }
  auto final = trainer.checkpoint();
  if (files && !saved_last) save_checkpoint(final, checkpoint_path(outputs.directory, final.step));
  return final;
}

std::string EvaluationReport::to_text() const {
  KeyValues kv;
  kv.set_uint("quadruples", quadruples);
  kv.set("reconstruction_error", reconstruction_error);
  kv.set("f0_transfer", f0_transfer);
  kv.set_uint("real_samples", real_samples);
  kv.set("disc_accuracy", disc_accuracy);
  return kv.to_text();
}

EvaluationReport evaluate(const Corpus& corpus, const TrainConfig& config,
                          const ModelConfig& model, const Predictor& predictor,
                          const DiscriminatorParams& discriminator, EvaluationOptions options) {
  const auto variants = held_out_variants(corpus, config);
  const auto frames = corpus.items.front().spectrogram.frames;
  Rng rng(options.seed);
  EvaluationReport report;

  constexpr std::size_t chunk = 16;
  std::size_t transferred = 0;
  double error = 0.0;
  for (std::size_t begin = 0; begin < options.quadruples; begin += chunk) {
    std::vector<AnalogyQuadruple> quads;
    for (std::size_t i = begin; i < std::min(begin + chunk, options.quadruples); ++i)
      quads.push_back(sample_quadruple(corpus, rng, variants));
    const auto d = stack(quads, model, &AnalogyQuadruple::d);
    const auto pred = predictor(stack(quads, model, &AnalogyQuadruple::a),
                                stack(quads, model, &AnalogyQuadruple::b),
                                stack(quads, model, &AnalogyQuadruple::c), d);
    if (pred.shape() != d.shape()) throw ShapeError("evaluate: predictor returned wrong shape");
    const auto p = pred.data(), t = d.data();
    for (std::size_t i = 0; i < p.size(); ++i) error += 0.5 * (p[i] - t[i]) * (p[i] - t[i]);
    for (std::size_t n = 0; n < quads.size(); ++n) {
      const auto bin = estimate_f0_bin(batch_row(pred, n, corpus.cqt, frames, true));
      const long target = corpus.cqt.nearest_bin(corpus.speakers[quads[n].labels[3].speaker].f0);
      if (bin && std::abs(static_cast<long>(*bin) - target) <= 1) ++transferred;
    }
    report.quadruples += quads.size();
  }
  report.reconstruction_error = report.quadruples ? error / static_cast<double>(report.quadruples) : 0.0;
  report.f0_transfer = fraction(transferred, report.quadruples);

  std::vector<const Spectrogram*> real;
  std::vector<std::size_t> classes;
  for (const auto& item : corpus.items)
    if (item.variant >= variants.begin && item.variant < variants.end) {
      real.push_back(&item.spectrogram);
      classes.push_back(model.class_of(item.word, item.speaker));
    }
  const auto logits = discriminator_forward(discriminator, model, spectrogram_batch(real, model));
  Rng tie_rng(mix_seed(options.seed, 1));
  std::size_t correct = 0;
  const auto values = logits.data();
  for (std::size_t i = 0; i < real.size(); ++i)
    correct += predict_class(values.subspan(i * model.n_classes(), model.n_classes()), &tie_rng) ==
               classes[i];
  report.real_samples = real.size();
  report.disc_accuracy = fraction(correct, real.size());
  return report;
}

EvaluationReport evaluate(const Checkpoint& checkpoint, const Corpus& corpus,
                          EvaluationOptions options) {
  const auto model = checked_model(checkpoint, corpus);
  const auto generator = generator_from(checkpoint);
  const auto discriminator = discriminator_from(checkpoint);
  const Predictor predictor = [&](const Tensor& a, const Tensor& b, const Tensor& c,
                                  const Tensor&) { return generator_forward(generator, model, a, b, c); };
  return evaluate(corpus, checkpoint.config, model, predictor, discriminator, options);
}

}  // namespace vc

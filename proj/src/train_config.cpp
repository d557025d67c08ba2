#include "vc/train_config.hpp"

#include <cmath>

#include "vc/cqt.hpp"

namespace vc {

namespace {

bool same(const OptimizerSettings& a, const OptimizerSettings& b) {
  return a.kind == b.kind && a.learning_rate == b.learning_rate && a.beta1 == b.beta1 &&
         a.beta2 == b.beta2 && a.epsilon == b.epsilon;
}

void validate_optimizer(const OptimizerSettings& s, const char* who) {
  const std::string w(who);
  if (!(s.learning_rate > 0.0 && std::isfinite(s.learning_rate)))
    throw ConfigError(w + " learning rate must be positive");
  if (!(s.beta1 >= 0.0 && s.beta1 < 1.0) || !(s.beta2 >= 0.0 && s.beta2 < 1.0))
    throw ConfigError(w + " betas must lie in [0, 1)");
  if (!(s.epsilon > 0.0)) throw ConfigError(w + " epsilon must be positive");
}

void put_optimizer(KeyValues& kv, const OptimizerSettings& s, const std::string& p) {
  kv.set(p + "optimizer", to_string(s.kind));
  kv.set(p + "lr", s.learning_rate);
  kv.set(p + "beta1", s.beta1);
  kv.set(p + "beta2", s.beta2);
  kv.set(p + "epsilon", s.epsilon);
}

OptimizerSettings get_optimizer(const KeyValues& kv, const std::string& p) {
  OptimizerSettings s;
  s.kind = parse_optimizer_kind(kv.get(p + "optimizer"));
  s.learning_rate = kv.get_double(p + "lr");
  s.beta1 = kv.get_double(p + "beta1");
  s.beta2 = kv.get_double(p + "beta2");
  s.epsilon = kv.get_double(p + "epsilon");
  return s;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 2 || batch_size % 2 != 0)
    throw ConfigError("batch_size must be even and at least 2, got " + std::to_string(batch_size));
  if (steps == 0) throw ConfigError("steps must be positive");
  if (disc_steps_per_gen_step == 0) throw ConfigError("disc_steps_per_gen_step must be positive");
  if (!(lambda >= 0.0 && std::isfinite(lambda))) throw ConfigError("lambda must be >= 0");
  if (held_out_variants == 0) throw ConfigError("held_out_variants must be positive");
  validate_optimizer(generator_optimizer, "generator");
  validate_optimizer(discriminator_optimizer, "discriminator");
}

bool TrainConfig::operator==(const TrainConfig& o) const {
  return batch_size == o.batch_size && steps == o.steps &&
         disc_steps_per_gen_step == o.disc_steps_per_gen_step && lambda == o.lambda &&
         same(generator_optimizer, o.generator_optimizer) &&
         same(discriminator_optimizer, o.discriminator_optimizer) && seed == o.seed &&
         checkpoint_interval == o.checkpoint_interval && corpus_path == o.corpus_path &&
         transform == o.transform && held_out_variants == o.held_out_variants;
}

void put_train_config(KeyValues& kv, const TrainConfig& c, const std::string& p) {
  kv.set_uint(p + "batch_size", c.batch_size);
  kv.set_uint(p + "steps", c.steps);
  kv.set_uint(p + "disc_steps_per_gen_step", c.disc_steps_per_gen_step);
  kv.set(p + "lambda", c.lambda);
  put_optimizer(kv, c.generator_optimizer, p + "gen_");
  put_optimizer(kv, c.discriminator_optimizer, p + "disc_");
  kv.set_uint(p + "seed", c.seed);
  kv.set_uint(p + "checkpoint_interval", c.checkpoint_interval);
  kv.set(p + "corpus_path", c.corpus_path);
  kv.set(p + "transform", to_string(c.transform));
  kv.set_uint(p + "held_out_variants", c.held_out_variants);
}

TrainConfig get_train_config(const KeyValues& kv, const std::string& p) {
  TrainConfig c;
  c.batch_size = kv.get_uint(p + "batch_size");
  c.steps = kv.get_uint(p + "steps");
  c.disc_steps_per_gen_step = kv.get_uint(p + "disc_steps_per_gen_step");
  c.lambda = kv.get_double(p + "lambda");
  c.generator_optimizer = get_optimizer(kv, p + "gen_");
  c.discriminator_optimizer = get_optimizer(kv, p + "disc_");
  c.seed = kv.get_uint(p + "seed");
  c.checkpoint_interval = kv.get_uint(p + "checkpoint_interval");
  c.corpus_path = kv.get(p + "corpus_path");
  c.transform = parse_transform_variant(kv.get(p + "transform"));
  c.held_out_variants = kv.get_uint(p + "held_out_variants");
  return c;
}

void put_model_config(KeyValues& kv, const ModelConfig& c, const std::string& p) {
  kv.set_uint(p + "bins", c.bins);
  kv.set_uint(p + "frames", c.frames);
  kv.set_uint(p + "latent", c.latent);
  kv.set_uint(p + "channels1", c.channels1);
  kv.set_uint(p + "channels2", c.channels2);
  kv.set_uint(p + "hidden", c.hidden);
  kv.set_uint(p + "n_words", c.n_words);
  kv.set_uint(p + "n_speakers", c.n_speakers);
  kv.set(p + "transform", to_string(c.transform));
  kv.set(p + "leaky_alpha", c.leaky_alpha);
}

ModelConfig get_model_config(const KeyValues& kv, const std::string& p) {
  ModelConfig c;
  c.bins = kv.get_uint(p + "bins");
  c.frames = kv.get_uint(p + "frames");
  c.latent = kv.get_uint(p + "latent");
  c.channels1 = kv.get_uint(p + "channels1");
  c.channels2 = kv.get_uint(p + "channels2");
  c.hidden = kv.get_uint(p + "hidden");
  c.n_words = kv.get_uint(p + "n_words");
  c.n_speakers = kv.get_uint(p + "n_speakers");
  c.transform = parse_transform_variant(kv.get(p + "transform"));
  c.leaky_alpha = kv.get_double(p + "leaky_alpha");
  c.validate();
  return c;
}

}  // namespace vc

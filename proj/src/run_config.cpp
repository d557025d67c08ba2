#include "vc/run_config.hpp"

#include <fstream>
#include <sstream>

namespace vc {

void RunConfig::validate() const {
  cqt.validate();
  corpus.validate();
  train.validate();
  if (log_interval == 0) throw ConfigError("log_interval must be positive");
  if (inversion_iterations == 0) throw ConfigError("render.inversion_iterations must be positive");
  if (eval.quadruples == 0) throw ConfigError("eval.quadruples must be positive");
}

KeyValues RunConfig::to_keyvalues() const {
  KeyValues kv;
  kv.set_uint("version", kRunConfigVersion);
  put_cqt_config(kv, cqt, "cqt.");
  kv.set_uint("corpus.n_speakers", corpus.n_speakers);
  kv.set_uint("corpus.n_words", corpus.n_words);
  kv.set_uint("corpus.variants_per_cell", corpus.variants_per_cell);
  kv.set_uint("corpus.seed", corpus.seed);
  kv.set("corpus.duration", corpus.duration);
  kv.set("corpus.max_harmonic_hz", corpus.max_harmonic_hz);
  kv.set("corpus.peak", corpus.peak);
  put_train_config(kv, train, "train.");
  kv.set_uint("train.log_interval", log_interval);
  kv.set_uint("render.inversion_iterations", inversion_iterations);
  kv.set_uint("render.inversion_seed", inversion_seed);
  kv.set_uint("eval.quadruples", eval.quadruples);
  kv.set_uint("eval.seed", eval.seed);
  return kv;
}

std::string RunConfig::to_text() const { return to_keyvalues().to_text(); }

RunConfig parse_run_config(const std::string& text) {
  KeyValues given;
  try {
    given = KeyValues::parse(text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  const auto version = given.find("version");
  if (!version) throw ConfigError("config: missing mandatory key 'version'");
  if (*version != std::to_string(kRunConfigVersion))
    throw ConfigError("config: unsupported version '" + *version + "' (expected " +
                      std::to_string(kRunConfigVersion) + ")");

  auto merged = RunConfig{}.to_keyvalues();
  for (const auto& [key, value] : given.entries()) {
    if (!merged.contains(key)) throw ConfigError("config: unknown key '" + key + "'");
    merged.set(key, value);
  }

  RunConfig c;
  try {
    c.cqt = get_cqt_config(merged, "cqt.");
    c.corpus.n_speakers = merged.get_uint("corpus.n_speakers");
    c.corpus.n_words = merged.get_uint("corpus.n_words");
    c.corpus.variants_per_cell = merged.get_uint("corpus.variants_per_cell");
    c.corpus.seed = merged.get_uint("corpus.seed");
    c.corpus.duration = merged.get_double("corpus.duration");
    c.corpus.max_harmonic_hz = merged.get_double("corpus.max_harmonic_hz");
    c.corpus.peak = merged.get_double("corpus.peak");
    c.train = get_train_config(merged, "train.");
    c.log_interval = merged.get_uint("train.log_interval");
    c.inversion_iterations = merged.get_uint("render.inversion_iterations");
    c.inversion_seed = merged.get_uint("render.inversion_seed");
    c.eval.quadruples = merged.get_uint("eval.quadruples");
    c.eval.seed = merged.get_uint("eval.seed");
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str());
}

}  // namespace vc

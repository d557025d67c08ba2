#pragma once

// Flat key=value configuration shared by every CLI command. Every key has a
// default; `version` is mandatory and unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <string>

#include "vc/corpus.hpp"
#include "vc/cqt.hpp"
#include "vc/keyvalue.hpp"
#include "vc/train_config.hpp"
#include "vc/trainer.hpp"

namespace vc {

inline constexpr std::uint64_t kRunConfigVersion = 1;

struct RunConfig {
  CqtConfig cqt;
  CorpusParams corpus;
  TrainConfig train;
  std::size_t log_interval = 100;        // console progress lines during training
  std::size_t inversion_iterations = 50;
  std::uint64_t inversion_seed = 0;      // phase recovery initialisation
  EvaluationOptions eval;

  void validate() const;
  KeyValues to_keyvalues() const;
  std::string to_text() const;
};

// Throws ConfigError naming the offending key or line.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace vc

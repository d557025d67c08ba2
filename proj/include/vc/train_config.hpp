#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "vc/analogy_gan.hpp"
#include "vc/keyvalue.hpp"
#include "vc/optim.hpp"

namespace vc {

struct TrainConfig {
  std::size_t batch_size = 16;
  std::size_t steps = 2000;
  std::size_t disc_steps_per_gen_step = 1;
  double lambda = 0.05;
  OptimizerSettings generator_optimizer;
  OptimizerSettings discriminator_optimizer;
  std::uint64_t seed = 1;
  std::size_t checkpoint_interval = 0;  // 0: final checkpoint only
  std::string corpus_path;
  TransformVariant transform = TransformVariant::additive;
  // The last `held_out_variants` variants of every cell are never trained on.
  std::size_t held_out_variants = 4;

  void validate() const;
  bool operator==(const TrainConfig&) const;
};

// Entries are "<prefix>batch_size", "<prefix>gen_lr", ...
void put_train_config(KeyValues& kv, const TrainConfig& config, const std::string& prefix);
TrainConfig get_train_config(const KeyValues& kv, const std::string& prefix);

void put_model_config(KeyValues& kv, const ModelConfig& config, const std::string& prefix);
ModelConfig get_model_config(const KeyValues& kv, const std::string& prefix);

}  // namespace vc

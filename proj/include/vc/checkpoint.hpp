#pragma once

// Training snapshot: configuration, step counter, every parameter tensor,
// both optimizer states and the random generator states.
//
// File layout: "VCKP", u32 version, length-prefixed key=value config block,
// u64 step, tensor records, optimizer states, rng states. See docs/formats.md.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vc/analogy_gan.hpp"
#include "vc/binary_io.hpp"
#include "vc/corpus.hpp"
#include "vc/optim.hpp"
#include "vc/train_config.hpp"

namespace vc {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TensorRecord {
  std::string name;
  Shape shape;
  std::vector<double> values;

  bool operator==(const TensorRecord&) const = default;
};

struct Checkpoint {
  TrainConfig config;
  ModelConfig model;
  CqtConfig cqt;                  // front-end the model was trained with
  std::size_t clip_samples = 0;   // utterance length the model expects
  std::uint64_t step = 0;
  std::vector<TensorRecord> tensors;
  OptimizerState generator_optimizer;
  OptimizerState discriminator_optimizer;
  std::string rng_state;      // text form of the batch sampler state
  std::string tie_rng_state;  // text form of the tie-breaking state

  const TensorRecord& tensor(const std::string& name) const;
};

std::vector<TensorRecord> snapshot_tensors(const std::vector<NamedTensor>& tensors);
// Copies values into existing tensors by name. Throws ParseError when a name
// is missing or a shape differs.
void restore_tensors(const Checkpoint& checkpoint, const std::vector<NamedTensor>& into);

GeneratorParams generator_from(const Checkpoint& checkpoint);
DiscriminatorParams discriminator_from(const Checkpoint& checkpoint);

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);
// I/O failures are reported as IoError naming the path.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace vc

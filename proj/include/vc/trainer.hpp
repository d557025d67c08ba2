#pragma once

// Alternating minimax training over a corpus: discriminator steps on batches
// that are half real and half generated, then a generator step on the
// combined analogy + adversarial objective.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vc/analogy_gan.hpp"
#include "vc/checkpoint.hpp"
#include "vc/corpus.hpp"
#include "vc/optim.hpp"
#include "vc/train_config.hpp"

namespace vc {

class TrainingError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Network geometry for a corpus: bins from the CQT, frames rounded up to a
// multiple of four (spectrograms are zero-padded at the end).
ModelConfig model_config_for(const Corpus& corpus, TransformVariant transform);

VariantRange training_variants(const Corpus& corpus, const TrainConfig& config);
VariantRange held_out_variants(const Corpus& corpus, const TrainConfig& config);

struct Batch {
  std::vector<const Spectrogram*> real;
  std::vector<std::size_t> real_classes;
  std::vector<AnalogyQuadruple> quadruples;
  std::vector<std::size_t> target_classes;  // class(w_d, s_d) per quadruple
  Tensor generated;  // generator outputs for the quadruples, no gradient path
};

// batch_size/2 real spectrograms drawn uniformly over (speaker, word) then
// variant, and batch_size/2 quadruples. The generator is run on the
// quadruples only when `with_generated` is set.
Batch make_batch(const Corpus& corpus, const ModelConfig& model, const GeneratorParams& generator,
                 Rng& rng, std::size_t batch_size, VariantRange variants,
                 bool with_generated = true);

struct DiscStepMetrics {
  double loss = 0.0;
  double real_accuracy = 0.0;
  double fake_detection = 0.0;
};

struct GenStepMetrics {
  double analogy_loss = 0.0;
  double adversarial_loss = 0.0;
  double total_loss = 0.0;
};

struct MetricsRecord {
  std::uint64_t step = 0;  // 1-based count of completed alternating steps
  double analogy_loss = 0.0;
  double disc_loss = 0.0;
  double gen_adv_loss = 0.0;
  double disc_real_accuracy = 0.0;
  double disc_fake_detection_rate = 0.0;
  double wall_time = 0.0;  // seconds since the run (or resume) started
};

// Tab-separated log. wall_time is not written so that logs are reproducible.
std::string metrics_header();
std::string format_metrics(const MetricsRecord& record);

class Trainer {
public:
  Trainer(TrainConfig config, const Corpus& corpus);
  // Resumes exactly where the checkpoint left off.
  Trainer(const Checkpoint& checkpoint, const Corpus& corpus);

  const TrainConfig& config() const { return config_; }
  const ModelConfig& model() const { return model_; }
  const Corpus& corpus() const { return corpus_; }
  GeneratorParams& generator() { return generator_; }
  DiscriminatorParams& discriminator() { return discriminator_; }
  const GeneratorParams& generator() const { return generator_; }
  const DiscriminatorParams& discriminator() const { return discriminator_; }
  std::uint64_t completed_steps() const { return step_; }

  Batch next_batch(bool with_generated);
  // One update of the discriminator; the generator is untouched.
  DiscStepMetrics disc_step(const Batch& batch);
  // One update of the generator; the discriminator is untouched.
  GenStepMetrics gen_step(const Batch& batch);
  // disc_steps_per_gen_step discriminator steps, then one generator step.
  MetricsRecord step();

  Checkpoint checkpoint() const;

private:
  void check_finite(double value, const char* term) const;

  TrainConfig config_;
  const Corpus& corpus_;
  ModelConfig model_;
  GeneratorParams generator_;
  DiscriminatorParams discriminator_;
  Optimizer generator_opt_;
  Optimizer discriminator_opt_;
  Rng rng_;
  Rng tie_rng_;
  std::uint64_t step_ = 0;
};

struct TrainOutputs {
  std::filesystem::path directory;  // checkpoints and metrics.tsv; empty for none
  std::function<void(const MetricsRecord&)> on_step;
};

// Runs until config.steps alternating steps are complete. The metrics log is
// appended to when resuming. Returns the final checkpoint.
Checkpoint train(Trainer& trainer, const TrainOutputs& outputs);

std::filesystem::path checkpoint_path(const std::filesystem::path& directory, std::uint64_t step);

struct EvaluationOptions {
  std::size_t quadruples = 200;
  std::uint64_t seed = 99;
};

struct EvaluationReport {
  std::size_t quadruples = 0;
  double reconstruction_error = 0.0;  // mean of 0.5 * ||pred - d||^2 per quadruple
  double f0_transfer = 0.0;           // fraction with estimated f0 within 1 bin of s2's f0
  std::size_t real_samples = 0;
  double disc_accuracy = 0.0;         // real-class accuracy on held-out items

  std::string to_text() const;
};

// Produces the predicted d for a batch of quadruples ([N x bins x frames] each).
using Predictor = std::function<Tensor(const Tensor& a, const Tensor& b, const Tensor& c,
                                       const Tensor& d)>;

// Scores predictions on held-out quadruples. The copy-d predictor scores the
// ceiling; the generator is the usual predictor.
EvaluationReport evaluate(const Corpus& corpus, const TrainConfig& config,
                          const ModelConfig& model, const Predictor& predictor,
                          const DiscriminatorParams& discriminator,
                          EvaluationOptions options = {});
EvaluationReport evaluate(const Checkpoint& checkpoint, const Corpus& corpus,
                          EvaluationOptions options = {});

}  // namespace vc

#pragma once

// Analogy generator (shared encoder, latent transform, decoder) and the
// class-conditional discriminator with |W|*|S| real classes plus one fake class.
//
// Spectrogram batches are tensors of shape [N x bins x frames].

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vc/cqt.hpp"
#include "vc/ops.hpp"
#include "vc/random.hpp"

namespace vc {

enum class TransformVariant { additive, deep };

std::string to_string(TransformVariant v);
TransformVariant parse_transform_variant(const std::string& text);

struct ModelConfig {
  std::size_t bins = 48;
  std::size_t frames = 64;
  std::size_t latent = 64;
  std::size_t channels1 = 16;
  std::size_t channels2 = 32;
  std::size_t hidden = 128;  // deep transform width
  std::size_t n_words = 4;
  std::size_t n_speakers = 2;
  TransformVariant transform = TransformVariant::additive;
  double leaky_alpha = 0.2;

  void validate() const;
  std::size_t n_classes() const { return n_words * n_speakers + 1; }
  std::size_t fake_class() const { return n_words * n_speakers; }
  std::size_t class_of(std::size_t word, std::size_t speaker) const {
    return word * n_speakers + speaker;
  }
  // Flattened size of the deepest feature map.
  std::size_t feature_size() const { return channels2 * (bins / 4) * (frames / 4); }

  bool operator==(const ModelConfig&) const = default;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct GeneratorParams {
  Tensor enc_conv1_w, enc_conv1_b;
  Tensor enc_conv2_w, enc_conv2_b;
  Tensor enc_fc_w, enc_fc_b;
  // Deep transform only; undefined for the additive variant.
  Tensor tr_fc1_w, tr_fc1_b;
  Tensor tr_fc2_w, tr_fc2_b;
  Tensor dec_fc_w, dec_fc_b;
  Tensor dec_deconv1_w, dec_deconv1_b;
  Tensor dec_deconv2_w, dec_deconv2_b;

  std::vector<NamedTensor> named() const;
  std::vector<Tensor> tensors() const;
};

struct DiscriminatorParams {
  Tensor conv1_w, conv1_b;
  Tensor conv2_w, conv2_b;
  Tensor head_w, head_b;

  std::vector<NamedTensor> named() const;
  std::vector<Tensor> tensors() const;
  // Value copies that take no gradient.
  DiscriminatorParams frozen() const;
};

GeneratorParams init_generator(const ModelConfig& config, Rng& rng);
// The classification head starts at zero, so the initial class distribution is uniform.
DiscriminatorParams init_discriminator(const ModelConfig& config, Rng& rng);

Tensor encode(const GeneratorParams& params, const ModelConfig& config, const Tensor& specs);
Tensor transform(const GeneratorParams& params, const ModelConfig& config, const Tensor& za,
                 const Tensor& zb, const Tensor& zc);
Tensor decode(const GeneratorParams& params, const ModelConfig& config, const Tensor& z);
// decode(transform(encode(a), encode(b), encode(c))) with one shared encoder.
Tensor generator_forward(const GeneratorParams& params, const ModelConfig& config,
                         const Tensor& a, const Tensor& b, const Tensor& c);

// 0.5 * squared error summed per example, averaged over the batch.
Tensor analogy_loss(const Tensor& predicted, const Tensor& target);

Tensor discriminator_forward(const DiscriminatorParams& params, const ModelConfig& config,
                             const Tensor& specs);

struct DiscriminatorOutput {
  Tensor loss;
  Tensor real_logits;
  Tensor generated_logits;
};

// Mean cross-entropy: real rows target their class, generated rows the fake
// class. Generated spectrograms are detached from whatever produced them.
DiscriminatorOutput discriminator_loss(const DiscriminatorParams& params,
                                       const ModelConfig& config, const Tensor& real,
                                       std::span<const std::size_t> real_classes,
                                       const Tensor& generated);

// Non-saturating generator objective: cross-entropy of the discriminator's
// logits against each generated sample's intended real class. The
// discriminator parameters are used as frozen copies.
Tensor generator_adversarial_loss(const DiscriminatorParams& params, const ModelConfig& config,
                                  const Tensor& generated,
                                  std::span<const std::size_t> target_classes);

Tensor generator_total_loss(const Tensor& analogy, const Tensor& adversarial, double lambda);

// Stacks spectrograms into [N x bins x frames], zero-padding or cropping frames.
Tensor spectrogram_batch(std::span<const Spectrogram* const> specs, const ModelConfig& config);
// Row `index` of a batch as a Spectrogram with the first `frames` frames;
// negative values clamped to 0 when asked.
Spectrogram batch_row(const Tensor& batch, std::size_t index, const CqtConfig& cqt,
                      std::size_t frames, bool clamp_nonnegative);

// Argmax of one logits row. Exact ties are broken uniformly with `tie_rng`
// when given, else by lowest index.
std::size_t predict_class(std::span<const double> logits_row, Rng* tie_rng = nullptr);

}  // namespace vc

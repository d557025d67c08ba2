#include "vc/analogy_gan.hpp"

#include <cmath>
#include <string>

namespace vc {

namespace {

constexpr ConvParams kDown{2, 1};
constexpr std::size_t kKernel = 3;

Tensor uniform_param(Shape shape, double bound, Rng& rng) {
  std::vector<double> values(shape_size(shape));
  for (auto& v : values) v = uniform(rng, -bound, bound);
  return Tensor(std::move(shape), std::move(values), true);
}

Tensor zero_param(Shape shape) { return Tensor::zeros(std::move(shape), true); }

// Layers followed by a leaky ReLU.
double leaky_bound(std::size_t fan_in, double alpha) {
  return std::sqrt(6.0 / ((1.0 + alpha * alpha) * static_cast<double>(fan_in)));
}

// Linear output layers.
double linear_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

void check_batch(const Tensor& specs, const ModelConfig& config, const char* who) {
  if (specs.rank() != 3 || specs.dim(1) != config.bins || specs.dim(2) != config.frames)
    throw ShapeError(std::string(who) + ": expected [N x " + std::to_string(config.bins) +
                     " x " + std::to_string(config.frames) + "], got " +
                     shape_string(specs.shape()));
}

void check_latent(const Tensor& z, const ModelConfig& config, const char* who) {
  if (z.rank() != 2 || z.dim(1) != config.latent)
    throw ShapeError(std::string(who) + ": expected [N x " + std::to_string(config.latent) +
                     "], got " + shape_string(z.shape()));
}

// Two strided convolutions with leaky ReLU, flattened to [N x feature_size].
Tensor conv_features(const Tensor& specs, const ModelConfig& config, const Tensor& w1,
                     const Tensor& b1, const Tensor& w2, const Tensor& b2) {
  const auto n = specs.dim(0);
  auto x = reshape(specs, {n, 1, config.bins, config.frames});
  x = leaky_relu(conv2d(x, w1, b1, kDown), config.leaky_alpha);
  x = leaky_relu(conv2d(x, w2, b2, kDown), config.leaky_alpha);
  return reshape(x, {n, config.feature_size()});
}

void push(std::vector<NamedTensor>& out, const char* name, const Tensor& t) {
  if (t.defined()) out.push_back({name, t});
}

}  // namespace

std::string to_string(TransformVariant v) {
  return v == TransformVariant::additive ? "additive" : "deep";
}

TransformVariant parse_transform_variant(const std::string& text) {
  if (text == "additive") return TransformVariant::additive;
  if (text == "deep") return TransformVariant::deep;
  throw ConfigError("unknown transform variant '" + text + "' (expected additive or deep)");
}

void ModelConfig::validate() const {
  if (bins < 4 || frames < 4 || bins % 4 != 0 || frames % 4 != 0)
    throw ConfigError("model bins and frames must be positive multiples of 4");
  if (latent == 0 || channels1 == 0 || channels2 == 0 || hidden == 0)
    throw ConfigError("model layer sizes must be positive");
  if (n_words < 2 || n_speakers < 2)
    throw ConfigError("model needs at least two words and two speakers");
  if (!(leaky_alpha >= 0.0 && leaky_alpha < 1.0))
    throw ConfigError("leaky_alpha must lie in [0, 1)");
}

std::vector<NamedTensor> GeneratorParams::named() const {
  std::vector<NamedTensor> out;
  push(out, "gen.enc.conv1.w", enc_conv1_w);
  push(out, "gen.enc.conv1.b", enc_conv1_b);
  push(out, "gen.enc.conv2.w", enc_conv2_w);
  push(out, "gen.enc.conv2.b", enc_conv2_b);
  push(out, "gen.enc.fc.w", enc_fc_w);
  push(out, "gen.enc.fc.b", enc_fc_b);
  push(out, "gen.tr.fc1.w", tr_fc1_w);
  push(out, "gen.tr.fc1.b", tr_fc1_b);
  push(out, "gen.tr.fc2.w", tr_fc2_w);
  push(out, "gen.tr.fc2.b", tr_fc2_b);
  push(out, "gen.dec.fc.w", dec_fc_w);
  push(out, "gen.dec.fc.b", dec_fc_b);
  push(out, "gen.dec.deconv1.w", dec_deconv1_w);
  push(out, "gen.dec.deconv1.b", dec_deconv1_b);
  push(out, "gen.dec.deconv2.w", dec_deconv2_w);
  push(out, "gen.dec.deconv2.b", dec_deconv2_b);
  return out;
}

std::vector<Tensor> GeneratorParams::tensors() const {
  std::vector<Tensor> out;
  for (auto& nt : named()) out.push_back(nt.tensor);
  return out;
}

std::vector<NamedTensor> DiscriminatorParams::named() const {
  std::vector<NamedTensor> out;
  push(out, "disc.conv1.w", conv1_w);
  push(out, "disc.conv1.b", conv1_b);
  push(out, "disc.conv2.w", conv2_w);
  push(out, "disc.conv2.b", conv2_b);
  push(out, "disc.head.w", head_w);
  push(out, "disc.head.b", head_b);
  return out;
}

std::vector<Tensor> DiscriminatorParams::tensors() const {
  std::vector<Tensor> out;
  for (auto& nt : named()) out.push_back(nt.tensor);
  return out;
}

DiscriminatorParams DiscriminatorParams::frozen() const {
  return {conv1_w.detach(), conv1_b.detach(), conv2_w.detach(),
          conv2_b.detach(), head_w.detach(), head_b.detach()};
}

GeneratorParams init_generator(const ModelConfig& config, Rng& rng) {
  config.validate();
  const double a = config.leaky_alpha;
  const auto c1 = config.channels1, c2 = config.channels2, z = config.latent;
  const auto k2 = kKernel * kKernel;
  const auto feat = config.feature_size();
  GeneratorParams p;
  p.enc_conv1_w = uniform_param({c1, 1, kKernel, kKernel}, leaky_bound(k2, a), rng);
  p.enc_conv1_b = zero_param({c1});
  p.enc_conv2_w = uniform_param({c2, c1, kKernel, kKernel}, leaky_bound(c1 * k2, a), rng);
  p.enc_conv2_b = zero_param({c2});
  p.enc_fc_w = uniform_param({feat, z}, linear_bound(feat, z), rng);
  p.enc_fc_b = zero_param({z});
  if (config.transform == TransformVariant::deep) {
    p.tr_fc1_w = uniform_param({2 * z, config.hidden}, leaky_bound(2 * z, a), rng);
    p.tr_fc1_b = zero_param({config.hidden});
    p.tr_fc2_w = uniform_param({config.hidden, z}, linear_bound(config.hidden, z), rng);
    p.tr_fc2_b = zero_param({z});
  }
  p.dec_fc_w = uniform_param({z, feat}, leaky_bound(z, a), rng);
  p.dec_fc_b = zero_param({feat});
  p.dec_deconv1_w = uniform_param({c2, c1, kKernel, kKernel}, leaky_bound(c2 * k2 / 4, a), rng);
  p.dec_deconv1_b = zero_param({c1});
  p.dec_deconv2_w = uniform_param({c1, 1, kKernel, kKernel}, linear_bound(c1 * k2 / 4, 1), rng);
  p.dec_deconv2_b = zero_param({1});
  return p;
}

DiscriminatorParams init_discriminator(const ModelConfig& config, Rng& rng) {
  config.validate();
  const double a = config.leaky_alpha;
  const auto c1 = config.channels1, c2 = config.channels2;
  const auto k2 = kKernel * kKernel;
  DiscriminatorParams p;
  p.conv1_w = uniform_param({c1, 1, kKernel, kKernel}, leaky_bound(k2, a), rng);
  p.conv1_b = zero_param({c1});
  p.conv2_w = uniform_param({c2, c1, kKernel, kKernel}, leaky_bound(c1 * k2, a), rng);
  p.conv2_b = zero_param({c2});
  p.head_w = zero_param({config.feature_size(), config.n_classes()});
  p.head_b = zero_param({config.n_classes()});
  return p;
}

Tensor encode(const GeneratorParams& params, const ModelConfig& config, const Tensor& specs) {
  check_batch(specs, config, "encode");
  const auto features = conv_features(specs, config, params.enc_conv1_w, params.enc_conv1_b,
                                      params.enc_conv2_w, params.enc_conv2_b);
  return linear(features, params.enc_fc_w, params.enc_fc_b);
}

Tensor transform(const GeneratorParams& params, const ModelConfig& config, const Tensor& za,
                 const Tensor& zb, const Tensor& zc) {
  check_latent(za, config, "transform");
  check_latent(zb, config, "transform");
  check_latent(zc, config, "transform");
  const auto delta = sub(zb, za);
  if (config.transform == TransformVariant::additive) return add(delta, zc);
  if (!params.tr_fc1_w.defined())
    throw ContractError("transform: deep variant requested but parameters are missing");
  const auto hidden = leaky_relu(
      linear(concat_columns(delta, zc), params.tr_fc1_w, params.tr_fc1_b), config.leaky_alpha);
  return linear(hidden, params.tr_fc2_w, params.tr_fc2_b);
}

Tensor decode(const GeneratorParams& params, const ModelConfig& config, const Tensor& z) {
  check_latent(z, config, "decode");
  const auto n = z.dim(0);
  auto x = leaky_relu(linear(z, params.dec_fc_w, params.dec_fc_b), config.leaky_alpha);
  x = reshape(x, {n, config.channels2, config.bins / 4, config.frames / 4});
  x = leaky_relu(conv2d_transpose(x, params.dec_deconv1_w, params.dec_deconv1_b, kDown, 1),
                 config.leaky_alpha);
  x = conv2d_transpose(x, params.dec_deconv2_w, params.dec_deconv2_b, kDown, 1);
  return reshape(x, {n, config.bins, config.frames});
}

Tensor generator_forward(const GeneratorParams& params, const ModelConfig& config,
                         const Tensor& a, const Tensor& b, const Tensor& c) {
  return decode(params, config,
                transform(params, config, encode(params, config, a),
                          encode(params, config, b), encode(params, config, c)));
}

Tensor analogy_loss(const Tensor& predicted, const Tensor& target) {
  if (predicted.shape() != target.shape())
    throw ShapeError("analogy_loss: shape mismatch " + shape_string(predicted.shape()) +
                     " vs " + shape_string(target.shape()));
  return mse_loss(predicted, target, predicted.dim(0));
}

Tensor discriminator_forward(const DiscriminatorParams& params, const ModelConfig& config,
                             const Tensor& specs) {
  check_batch(specs, config, "discriminator_forward");
  const auto features = conv_features(specs, config, params.conv1_w, params.conv1_b,
                                      params.conv2_w, params.conv2_b);
  return linear(features, params.head_w, params.head_b);
}

DiscriminatorOutput discriminator_loss(const DiscriminatorParams& params,
                                       const ModelConfig& config, const Tensor& real,
                                       std::span<const std::size_t> real_classes,
                                       const Tensor& generated) {
  if (!real.defined() || !generated.defined() || real.dim(0) == 0 || generated.dim(0) == 0)
    throw ContractError("discriminator_loss: empty batch");
  if (real_classes.size() != real.dim(0))
    throw ShapeError("discriminator_loss: one class per real sample required");
  for (auto c : real_classes)
    if (c >= config.fake_class())
      throw std::out_of_range("discriminator_loss: real class " + std::to_string(c) +
                              " out of range");
  const auto n_real = real.dim(0), n_gen = generated.dim(0);
  DiscriminatorOutput out;
  out.real_logits = discriminator_forward(params, config, real);
  out.generated_logits = discriminator_forward(params, config, generated.detach());
  const std::vector<std::size_t> fake(n_gen, config.fake_class());
  const double total = static_cast<double>(n_real + n_gen);
  out.loss = add(scale(softmax_cross_entropy(out.real_logits, real_classes),
                       static_cast<double>(n_real) / total),
                 scale(softmax_cross_entropy(out.generated_logits, fake),
                       static_cast<double>(n_gen) / total));
  return out;
}

Tensor generator_adversarial_loss(const DiscriminatorParams& params, const ModelConfig& config,
                                  const Tensor& generated,
                                  std::span<const std::size_t> target_classes) {
  if (!generated.defined() || generated.dim(0) == 0)
    throw ContractError("generator_adversarial_loss: empty batch");
  if (target_classes.size() != generated.dim(0))
    throw ShapeError("generator_adversarial_loss: one target class per sample required");
  for (auto c : target_classes)
    if (c >= config.fake_class())
      throw std::out_of_range("generator_adversarial_loss: target class " + std::to_string(c) +
                              " is not a real class");
  const auto logits = discriminator_forward(params.frozen(), config, generated);
  return softmax_cross_entropy(logits, target_classes);
}

Tensor generator_total_loss(const Tensor& analogy, const Tensor& adversarial, double lambda) {
  if (lambda == 0.0) return analogy;
  return add(analogy, scale(adversarial, lambda));
}

Tensor spectrogram_batch(std::span<const Spectrogram* const> specs, const ModelConfig& config) {
  if (specs.empty()) throw ContractError("spectrogram_batch: empty batch");
  const auto K = config.bins, T = config.frames;
  std::vector<double> values(specs.size() * K * T, 0.0);
  for (std::size_t n = 0; n < specs.size(); ++n) {
    const auto& s = *specs[n];
    if (s.bins != K)
      throw ShapeError("spectrogram_batch: spectrogram has " + std::to_string(s.bins) +
                       " bins, model expects " + std::to_string(K));
    const auto frames = std::min(s.frames, T);
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t t = 0; t < frames; ++t) values[(n * K + k) * T + t] = s.at(k, t);
  }
  return Tensor({specs.size(), K, T}, std::move(values));
}

Spectrogram batch_row(const Tensor& batch, std::size_t index, const CqtConfig& cqt,
                      std::size_t frames, bool clamp_nonnegative) {
  if (batch.rank() != 3 || index >= batch.dim(0) || frames > batch.dim(2))
    throw ShapeError("batch_row: bad index or frame count for " + shape_string(batch.shape()));
  const auto K = batch.dim(1), T = batch.dim(2);
  Spectrogram s{K, frames, std::vector<double>(K * frames), cqt};
  const auto data = batch.data();
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t t = 0; t < frames; ++t) {
      const double v = data[(index * K + k) * T + t];
      s.at(k, t) = clamp_nonnegative && v < 0.0 ? 0.0 : v;
    }
  return s;
}

std::size_t predict_class(std::span<const double> logits_row, Rng* tie_rng) {
  if (logits_row.empty()) throw ContractError("predict_class: empty logits");
  double best = logits_row[0];
  for (double v : logits_row) best = std::max(best, v);
  std::vector<std::size_t> ties;
  for (std::size_t i = 0; i < logits_row.size(); ++i)
    if (logits_row[i] == best) ties.push_back(i);
  if (ties.size() == 1 || tie_rng == nullptr) return ties.front();
  return ties[uniform_index(*tie_rng, ties.size())];
}

}  // namespace vc

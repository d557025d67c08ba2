#include "vc/checkpoint.hpp"

#include <string_view>

#include "vc/keyvalue.hpp"

namespace vc {

namespace {

constexpr std::string_view kMagic = "VCKP";

void write_optimizer(ByteWriter& w, const OptimizerState& s) {
  w.u8(s.settings.kind == OptimizerKind::adam ? 1 : 0);
  w.f64(s.settings.learning_rate);
  w.f64(s.settings.beta1);
  w.f64(s.settings.beta2);
  w.f64(s.settings.epsilon);
  w.u64(s.step_count);
  w.u32(static_cast<std::uint32_t>(s.first_moment.size()));
  for (std::size_t i = 0; i < s.first_moment.size(); ++i) {
    w.u32(static_cast<std::uint32_t>(s.first_moment[i].size()));
    w.f64s(s.first_moment[i]);
    w.f64s(s.second_moment[i]);
  }
}

OptimizerState read_optimizer(ByteReader& r) {
  OptimizerState s;
  const auto at = r.offset();
  const auto kind = r.u8();
  if (kind > 1) throw ParseError("checkpoint: unknown optimizer kind", at);
  s.settings.kind = kind == 1 ? OptimizerKind::adam : OptimizerKind::sgd;
  s.settings.learning_rate = r.f64();
  s.settings.beta1 = r.f64();
  s.settings.beta2 = r.f64();
  s.settings.epsilon = r.f64();
  s.step_count = r.u64();
  const auto n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto len = r.u32();
    s.first_moment.push_back(r.f64s(len));
    s.second_moment.push_back(r.f64s(len));
  }
  return s;
}

}  // namespace

const TensorRecord& Checkpoint::tensor(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw ParseError("checkpoint: no tensor named '" + name + "'", 0);
}

std::vector<TensorRecord> snapshot_tensors(const std::vector<NamedTensor>& tensors) {
  std::vector<TensorRecord> out;
  out.reserve(tensors.size());
  for (const auto& nt : tensors) out.push_back({nt.name, nt.tensor.shape(), nt.tensor.to_vector()});
  return out;
}

void restore_tensors(const Checkpoint& checkpoint, const std::vector<NamedTensor>& into) {
  for (const auto& nt : into) {
    const auto& rec = checkpoint.tensor(nt.name);
    if (rec.shape != nt.tensor.shape())
      throw ParseError("checkpoint: tensor '" + nt.name + "' has shape " +
                           shape_string(rec.shape) + ", model expects " +
                           shape_string(nt.tensor.shape()),
                       0);
    auto t = nt.tensor;
    auto data = t.mutable_data();
    std::copy(rec.values.begin(), rec.values.end(), data.begin());
  }
}

GeneratorParams generator_from(const Checkpoint& checkpoint) {
  Rng scratch(0);
  auto params = init_generator(checkpoint.model, scratch);
  restore_tensors(checkpoint, params.named());
  return params;
}

DiscriminatorParams discriminator_from(const Checkpoint& checkpoint) {
  Rng scratch(0);
  auto params = init_discriminator(checkpoint.model, scratch);
  restore_tensors(checkpoint, params.named());
  return params;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& c) {
  KeyValues kv;
  put_train_config(kv, c.config, "train.");
  put_model_config(kv, c.model, "model.");
  put_cqt_config(kv, c.cqt, "cqt.");
  kv.set_uint("clip.samples", c.clip_samples);

  ByteWriter w;
  w.raw(kMagic);
  w.u32(kCheckpointVersion);
  w.str(kv.to_text());
  w.u64(c.step);
  w.u32(static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& t : c.tensors) {
    w.str(t.name);
    w.u8(static_cast<std::uint8_t>(t.shape.size()));
    for (auto d : t.shape) w.u32(static_cast<std::uint32_t>(d));
    w.f64s(t.values);
  }
  write_optimizer(w, c.generator_optimizer);
  write_optimizer(w, c.discriminator_optimizer);
  w.str(c.rng_state);
  w.str(c.tie_rng_state);
  return w.take();
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.remaining() < 8 || r.raw(4) != kMagic) throw ParseError("checkpoint: bad magic tag", 0);
  const auto version = r.u32();
  if (version != kCheckpointVersion)
    throw ParseError("checkpoint: unsupported version " + std::to_string(version), 4);

  Checkpoint c;
  const auto config_at = r.offset();
  try {
    const auto kv = KeyValues::parse(r.str());
    c.config = get_train_config(kv, "train.");
    c.model = get_model_config(kv, "model.");
    c.cqt = get_cqt_config(kv, "cqt.");
    c.clip_samples = kv.get_uint("clip.samples");
  } catch (const ParseError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("checkpoint: config block: ") + e.what(), config_at);
  }
  c.step = r.u64();
  const auto n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    TensorRecord t;
    t.name = r.str();
    const auto rank_at = r.offset();
    const auto rank = r.u8();
    if (rank == 0 || rank > 4) throw ParseError("checkpoint: tensor rank out of range", rank_at);
    std::size_t count = 1;
    for (std::uint8_t k = 0; k < rank; ++k) {
      t.shape.push_back(r.u32());
      if (t.shape.back() == 0 || t.shape.back() > r.remaining() / 8 / count)
        throw ParseError("checkpoint: tensor '" + t.name + "' dimensions exceed the file", rank_at);
      count *= t.shape.back();
    }
    t.values = r.f64s(count);
    c.tensors.push_back(std::move(t));
  }
  c.generator_optimizer = read_optimizer(r);
  c.discriminator_optimizer = read_optimizer(r);
  c.rng_state = r.str();
  c.tie_rng_state = r.str();
  if (!r.done()) throw ParseError("checkpoint: trailing bytes", r.offset());
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  write_file(path, serialize_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file(path));
}

}  // namespace vc

#include "lankit/lan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lankit::lan {

NoiseSource NoiseSource::constant(float value) {
  NoiseSource s(Kind::Constant, 0);
  s.constant_value_ = value;
  return s;
}

NoiseSource NoiseSource::bootstrap(const std::vector<Tensor>* dataset, std::uint64_t seed) {
  if (dataset == nullptr || dataset->empty()) {
    throw ConfigError("bootstrap noise needs a non-empty dataset");
  }
  NoiseSource s(Kind::Bootstrap, seed);
  s.dataset_ = dataset;
  return s;
}

NoiseSource NoiseSource::uniform(float lo, float hi, std::uint64_t seed) {
  if (!(lo < hi)) throw ConfigError("uniform noise needs lo < hi");
  NoiseSource s(Kind::Uniform, seed);
  s.lo_ = lo;
  s.hi_ = hi;
  return s;
}

Tensor NoiseSource::sample(const std::vector<int>& shape) {
  switch (kind_) {
    case Kind::Constant:
      return Tensor::full(shape, constant_value_);
    case Kind::Bootstrap: {
      const Tensor& pick = (*dataset_)[rng_.index(dataset_->size())];
      if (pick.shape != shape) {
        throw ShapeError("bootstrap noise sample shape " + shape_str(pick.shape) +
                         " does not match requested " + shape_str(shape));
      }
      return pick;
    }
    case Kind::Uniform: {
      Tensor out = Tensor::zeros(shape);
      for (float& v : out.data) v = rng_.uniform(lo_, hi_);
      return out;
    }
  }
  throw ConfigError("unknown noise kind");
}

AttentionMask AttentionMask::from_tensor(Tensor t) {
  for (float v : t.data) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw NumericError("attention mask entry " + std::to_string(v) + " outside [0,1]");
    }
  }
  return AttentionMask{std::move(t)};
}

Tensor importance(const AttentionMask& mask) {
  Tensor out = mask.values;
  for (float& v : out.data) v = 1.0f - v;
  return out;
}

Tensor corrupt(const Tensor& x, const Tensor& mask, const Tensor& eta) {
  require_same_shape(x, mask, "corrupt");
  require_same_shape(x, eta, "corrupt");
  Tensor out = Tensor::zeros(x.shape);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const float a = mask.data[i];
    out.data[i] = a * eta.data[i] + (1.0f - a) * x.data[i];
  }
  require_finite(out, "corrupted input");
  return out;
}

ad::Value corrupt(ad::Tape& tape, ad::Value x, ad::Value mask, ad::Value eta) {
  require_same_shape(tape.value(x), tape.value(mask), "corrupt");
  require_same_shape(tape.value(x), tape.value(eta), "corrupt");
  ad::Value ones = tape.constant(Tensor::ones(tape.value(x).shape));
  ad::Value keep = ad::subtract(ones, mask);
  return ad::add(ad::multiply(mask, eta), ad::multiply(keep, x));
}

std::vector<int> mask_shape_for(const std::vector<int>& input_shape) {
  if (input_shape.size() == 3 && input_shape[0] > 1) {
    return {1, input_shape[1], input_shape[2]};
  }
  return input_shape;
}

ad::Value expand_mask(ad::Tape& tape, ad::Value mask, const std::vector<int>& input_shape) {
  const Tensor& mv = tape.value(mask);
  if (mv.shape == input_shape) return mask;
  if (input_shape.size() == 3 && mv.shape == mask_shape_for(input_shape)) {
    std::vector<ad::Value> copies(static_cast<std::size_t>(input_shape[0]), mask);
    return ad::concat(copies, 0);
  }
  throw ShapeError("mask shape " + shape_str(mv.shape) + " cannot cover input " +
                   shape_str(input_shape));
}

Tensor expand_mask(const Tensor& mask, const std::vector<int>& input_shape) {
  ad::Tape tape;
  return tape.value(expand_mask(tape, tape.constant(mask), input_shape));
}

namespace {

// Shared step body: builds corrupt -> F -> cross-entropy against the fixed
// clean target for k draws, minus the mean-mask penalty. mask_value is the
// (possibly tiled) mask node of the input's shape; penalty uses the raw mask.
ad::Value objective_on_tape(ad::Tape& tape, const nn::Checkpoint& F,
                            std::span<const ad::Value> f_params, ad::Value x_const,
                            ad::Value raw_mask, ad::Value full_mask, const Tensor& clean_target,
                            NoiseSource& noise, float beta, int k_samples) {
  const std::vector<int>& in_shape = F.spec.input_shape;
  ad::Value ce_total{};
  for (int k = 0; k < k_samples; ++k) {
    ad::Value eta = tape.constant(noise.sample(in_shape));
    ad::Value corrupted = corrupt(tape, x_const, full_mask, eta);
    ad::Value out = nn::apply_network(tape, F.spec, f_params, corrupted, false, nullptr);
    ad::Value ce = nn::cross_entropy(tape, out, clean_target);
    ce_total = (k == 0) ? ce : ad::add(ce_total, ce);
  }
  ad::Value ce_mean = ad::scalar_multiply(ce_total, 1.0f / static_cast<float>(k_samples));
  ad::Value penalty = ad::scalar_multiply(ad::mean(raw_mask), beta);
  return ad::subtract(ce_mean, penalty);
}

std::vector<ad::Value> freeze_params(ad::Tape& tape, const nn::Checkpoint& ckpt) {
  std::vector<ad::Value> vals;
  vals.reserve(ckpt.params.size());
  for (const auto& [name, tensor] : ckpt.params) vals.push_back(tape.constant(tensor));
  return vals;
}

}  // namespace

float lan_loss(const nn::Checkpoint& F, const Tensor& x, const AttentionMask& mask,
               NoiseSource& noise, float beta, int k_samples) {
  if (k_samples < 1) throw ConfigError("lan_loss: k_samples must be >= 1");
  Tensor full = expand_mask(mask.values, F.spec.input_shape);
  Tensor target = nn::forward(F, x);
  double ce_acc = 0.0;
  for (int k = 0; k < k_samples; ++k) {
    Tensor eta = noise.sample(F.spec.input_shape);
    Tensor corrupted = corrupt(x, full, eta);
    ce_acc += nn::cross_entropy(nn::forward(F, corrupted), target);
  }
  return static_cast<float>(ce_acc / k_samples) - beta * mean_of(mask.values);
}

nn::Checkpoint train_lan(const nn::Checkpoint& F, const std::vector<Tensor>& dataset,
                         NoiseSource& noise, const LanTrainConfig& cfg) {
  if (dataset.empty()) throw ConfigError("train_lan: empty dataset");
  if (cfg.noise_samples < 1) throw ConfigError("train_lan: noise_samples must be >= 1");
  if (cfg.lan_arch.layers.empty() || cfg.lan_arch.layers.back().act != nn::Activation::Sigmoid) {
    throw ConfigError("LAN architecture must end with a sigmoid layer");
  }
  const std::vector<int> m_shape = mask_shape_for(F.spec.input_shape);
  if (cfg.lan_arch.output_dim() != numel_of(m_shape)) {
    throw ConfigError("LAN output dimension " + std::to_string(cfg.lan_arch.output_dim()) +
                      " does not match mask size " + std::to_string(numel_of(m_shape)));
  }
  if (cfg.lan_arch.input_shape != F.spec.input_shape) {
    throw ConfigError("LAN input shape must match the classifier input shape");
  }

  // The clean outputs are fixed targets; compute them once up front.
  std::vector<Tensor> targets;
  targets.reserve(dataset.size());
  for (const Tensor& x : dataset) targets.push_back(nn::forward(F, x));

  nn::ParamList lan_params = nn::init_parameters(cfg.lan_arch, split_seed(cfg.seed, 0));
  Rng shuffle_rng(split_seed(cfg.seed, 1));
  nn::AdamState adam(lan_params, nn::AdamConfig{cfg.lr, 0.9f, 0.999f, 1e-8f});

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();

  const int batch = std::max(1, cfg.batch_size);
  for (std::int64_t it = 0; it < cfg.iterations; ++it) {
    ad::Tape tape;
    std::vector<ad::Value> avals;
    avals.reserve(lan_params.size());
    for (const auto& [name, tensor] : lan_params) avals.push_back(tape.leaf(tensor, true));
    std::vector<ad::Value> fvals = freeze_params(tape, F);

    ad::Value total{};
    for (int b = 0; b < batch; ++b) {
      if (cursor >= order.size()) {
        shuffle_rng.shuffle(order);
        cursor = 0;
      }
      const std::size_t idx = order[cursor++];
      ad::Value x_const = tape.constant(dataset[idx]);
      ad::Value flat_mask =
          nn::apply_network(tape, cfg.lan_arch, avals, x_const, false, nullptr);
      ad::Value raw_mask = ad::reshape(flat_mask, m_shape);
      ad::Value full_mask = expand_mask(tape, raw_mask, F.spec.input_shape);
      ad::Value obj = objective_on_tape(tape, F, fvals, x_const, raw_mask, full_mask,
                                        targets[idx], noise, cfg.beta, cfg.noise_samples);
      total = (b == 0) ? obj : ad::add(total, obj);
    }
    ad::Value loss = ad::scalar_multiply(total, 1.0f / static_cast<float>(batch));
    if (!std::isfinite(tape.value(loss).item())) {
      throw NumericError("LAN training diverged at iteration " + std::to_string(it) +
                         " (loss not finite)");
    }
    tape.backward(loss);

    std::vector<Tensor> grads;
    grads.reserve(avals.size());
    for (ad::Value pv : avals) grads.push_back(tape.grad(pv));
    adam.step(lan_params, grads);
  }

  return nn::Checkpoint{cfg.lan_arch, std::move(lan_params), cfg.seed, cfg.iterations};
}

AttentionMask lan_mask(const nn::Checkpoint& lan, const Tensor& x) {
  Tensor flat = nn::forward(lan, x);
  Tensor shaped(mask_shape_for(x.shape), flat.data);
  return AttentionMask::from_tensor(std::move(shaped));
}

AttentionMask train_sample_mask(const nn::Checkpoint& F, const Tensor& x, NoiseSource& noise,
                                const SampleMaskConfig& cfg) {
  if (cfg.noise_samples < 1) throw ConfigError("train_sample_mask: noise_samples must be >= 1");
  if (x.shape != F.spec.input_shape) {
    throw ShapeError("sample shape " + shape_str(x.shape) + " does not match classifier input " +
                     shape_str(F.spec.input_shape));
  }
  const std::vector<int> m_shape = mask_shape_for(x.shape);
  Tensor target = nn::forward(F, x);

  // Zero logits start the mask at 0.5 everywhere.
  nn::ParamList logits;
  logits.emplace_back("mask.logits", Tensor::zeros(m_shape));
  nn::AdamState adam(logits, nn::AdamConfig{cfg.lr, 0.9f, 0.999f, 1e-8f});

  for (std::int64_t it = 0; it < cfg.iterations; ++it) {
    ad::Tape tape;
    ad::Value z = tape.leaf(logits[0].second, true);
    ad::Value raw_mask = ad::sigmoid(z);
    ad::Value full_mask = expand_mask(tape, raw_mask, x.shape);
    ad::Value x_const = tape.constant(x);
    std::vector<ad::Value> fvals = freeze_params(tape, F);
    ad::Value loss = objective_on_tape(tape, F, fvals, x_const, raw_mask, full_mask, target,
                                       noise, cfg.beta, cfg.noise_samples);
    if (!std::isfinite(tape.value(loss).item())) {
      throw NumericError("sample mask optimization diverged at iteration " + std::to_string(it));
    }
    tape.backward(loss);
    std::vector<Tensor> grads{tape.grad(z)};
    adam.step(logits, grads);
  }

  ad::Tape tape;
  Tensor mask = tape.value(ad::sigmoid(tape.constant(logits[0].second)));
  return AttentionMask::from_tensor(std::move(mask));
}

}  // namespace lankit::lan

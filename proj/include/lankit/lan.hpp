#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lankit/nn.hpp"
#include "lankit/rng.hpp"
#include "lankit/tensor.hpp"

namespace lankit::lan {

// Generator of corruption vectors. Copyable; a copy replays the same draw
// sequence from wherever the source currently stands.
class NoiseSource {
 public:
  enum class Kind { Constant, Bootstrap, Uniform };

  static NoiseSource constant(float value);
  // dataset outlives the source; samples must have the corrupted input's shape.
  static NoiseSource bootstrap(const std::vector<Tensor>* dataset, std::uint64_t seed);
  static NoiseSource uniform(float lo, float hi, std::uint64_t seed);

  Tensor sample(const std::vector<int>& shape);
  Kind kind() const { return kind_; }
  float constant_value() const { return constant_value_; }

 private:
  NoiseSource(Kind kind, std::uint64_t seed) : kind_(kind), rng_(seed) {}

  Kind kind_;
  float constant_value_ = 0.0f;
  const std::vector<Tensor>* dataset_ = nullptr;
  float lo_ = 0.0f, hi_ = 1.0f;
  Rng rng_;
};

// Per-component replaceability scores in [0,1]: 1 means the component can be
// swapped for noise without moving the network's output, 0 means critical.
struct AttentionMask {
  Tensor values;

  static AttentionMask from_tensor(Tensor t);  // validates the [0,1] range
};

// 1 - mask, the "warm = important" view.
Tensor importance(const AttentionMask& mask);

// Blends input and noise under the mask: mask*eta + (1-mask)*x elementwise.
Tensor corrupt(const Tensor& x, const Tensor& mask, const Tensor& eta);
ad::Value corrupt(ad::Tape& tape, ad::Value x, ad::Value mask, ad::Value eta);

// Masks over multi-channel images are single-channel, tiled across channels.
// Returns the trainable mask shape for a given input shape.
std::vector<int> mask_shape_for(const std::vector<int>& input_shape);
// (1,h,w) -> (c,h,w); identity when the input is single-channel or flat.
ad::Value expand_mask(ad::Tape& tape, ad::Value mask, const std::vector<int>& input_shape);
Tensor expand_mask(const Tensor& mask, const std::vector<int>& input_shape);

// Monte Carlo estimate of the training objective for one input: mean over K
// noise draws of cross_entropy(F(corrupt(x)), F(x)) minus beta * mean(mask).
// F(x) is a fixed target; no gradient flows through the clean pass.
float lan_loss(const nn::Checkpoint& F, const Tensor& x, const AttentionMask& mask,
               NoiseSource& noise, float beta, int k_samples);

struct LanTrainConfig {
  float beta = 1.0f;
  float lr = 0.0001f;
  std::int64_t iterations = 0;
  int noise_samples = 1;  // K draws per sample per step
  std::uint64_t seed = 0;
  nn::NetworkSpec lan_arch;  // sigmoid head, output dim = mask size
  int batch_size = 32;
};

// Trains a mask-producing network A against the frozen classifier F over the
// whole dataset. Returns A as a checkpoint.
nn::Checkpoint train_lan(const nn::Checkpoint& F, const std::vector<Tensor>& dataset,
                         NoiseSource& noise, const LanTrainConfig& cfg);

// Evaluates a trained LAN on one input.
AttentionMask lan_mask(const nn::Checkpoint& lan, const Tensor& x);

struct SampleMaskConfig {
  float beta = 1.0f;
  float lr = 0.05f;
  std::int64_t iterations = 0;
  int noise_samples = 1;
  std::uint64_t seed = 0;
};

// Optimizes a single mask for a single input: unconstrained logits of the
// mask shape, sigmoid-squashed, Adam-updated. Logits start at zero.
AttentionMask train_sample_mask(const nn::Checkpoint& F, const Tensor& x, NoiseSource& noise,
                                const SampleMaskConfig& cfg);

}  // namespace lankit::lan

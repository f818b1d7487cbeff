#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lankit/autodiff.hpp"
#include "lankit/rng.hpp"
#include "lankit/tensor.hpp"

namespace lankit::nn {

enum class Activation { Identity, LeakyRelu, Sigmoid, Tanh, Softmax };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct LayerSpec {
  enum class Kind { Conv, Fc, Dropout };

  Kind kind = Kind::Fc;
  // conv
  int filters = 0;
  int stride = 1;
  int fh = 0, fw = 0;
  // fc
  int units = 0;
  Activation act = Activation::Identity;
  // dropout
  float keep_prob = 1.0f;

  static LayerSpec conv(int filters, int stride, int fh, int fw, Activation act);
  static LayerSpec fc(int units, Activation act);
  static LayerSpec dropout(float keep_prob);
};

// Declarative feed-forward network: input shape plus an ordered layer list.
struct NetworkSpec {
  std::vector<int> input_shape;
  std::vector<LayerSpec> layers;

  // Output shapes per layer; validates that consecutive layers compose.
  std::vector<std::vector<int>> infer_shapes() const;
  int output_dim() const;
};

bool operator==(const LayerSpec& a, const LayerSpec& b);
bool operator==(const NetworkSpec& a, const NetworkSpec& b);

using ParamList = std::vector<std::pair<std::string, Tensor>>;

// Network spec plus trained parameters; the serializable unit.
struct Checkpoint {
  NetworkSpec spec;
  ParamList params;
  std::uint64_t seed = 0;
  std::int64_t iterations = 0;
};

// Glorot-uniform weights, zero biases. Deterministic in seed.
ParamList init_parameters(const NetworkSpec& spec, std::uint64_t seed);

// Records the network's computation on the tape. params must align with
// init_parameters order. dropout_rng is consumed only when training is true
// and the spec has dropout layers.
ad::Value apply_network(ad::Tape& tape, const NetworkSpec& spec, std::span<const ad::Value> params,
                        ad::Value x, bool training, Rng* dropout_rng);

// Evaluation-mode forward pass: pure function of (checkpoint, x).
Tensor forward(const Checkpoint& ckpt, const Tensor& x);

// -sum target_i * log(max(pred_i, 1e-12)). Both arguments must be
// distributions over the same support.
float cross_entropy(const Tensor& pred, const Tensor& target);
// Graph version with a constant target.
ad::Value cross_entropy(ad::Tape& tape, ad::Value pred, const Tensor& target);

float entropy(const Tensor& dist);

struct AdamConfig {
  float lr = 0.001f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// Per-parameter moment accumulators for bias-corrected Adam.
class AdamState {
 public:
  AdamState(const ParamList& params, AdamConfig cfg);

  // Applies one update in place. Throws NumericError naming the parameter if
  // a gradient is non-finite.
  void step(ParamList& params, std::span<const Tensor> grads);

  std::int64_t steps_taken() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

struct TrainConfig {
  float lr = 0.001f;
  std::int64_t iterations = 0;
  int batch_size = 32;
  std::uint64_t seed = 0;
  // Mean training loss per 500-step window, recorded for monitoring.
  bool record_loss = false;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<float> window_losses;  // filled when record_loss is set
};

// Minimizes mean cross-entropy against one-hot labels over shuffled
// minibatches. Labels must lie in [0, output_dim).
TrainResult train_classifier(const NetworkSpec& spec, const std::vector<Tensor>& inputs,
                             const std::vector<int>& labels, const TrainConfig& cfg);

// argmax of forward(ckpt, x).
int predict(const Checkpoint& ckpt, const Tensor& x);

// Fraction of samples with predict() == label. Evaluation-mode forward is
// pure, so jobs > 1 fans the loop out across threads; results are identical
// to the single-threaded pass.
float accuracy(const Checkpoint& ckpt, const std::vector<Tensor>& inputs,
               const std::vector<int>& labels, int jobs = 1);

}  // namespace lankit::nn

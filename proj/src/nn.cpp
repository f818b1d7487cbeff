#include "lankit/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

namespace lankit::nn {

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::LeakyRelu: return "leaky_relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
    case Activation::Softmax: return "softmax";
  }
  throw ConfigError("unknown activation enum value");
}

Activation activation_from_name(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "leaky_relu") return Activation::LeakyRelu;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "tanh") return Activation::Tanh;
  if (name == "softmax") return Activation::Softmax;
  throw ConfigError("unknown activation name '" + name + "'");
}

LayerSpec LayerSpec::conv(int filters, int stride, int fh, int fw, Activation act) {
  LayerSpec l;
  l.kind = Kind::Conv;
  l.filters = filters;
  l.stride = stride;
  l.fh = fh;
  l.fw = fw;
  l.act = act;
  return l;
}

LayerSpec LayerSpec::fc(int units, Activation act) {
  LayerSpec l;
  l.kind = Kind::Fc;
  l.units = units;
  l.act = act;
  return l;
}

LayerSpec LayerSpec::dropout(float keep_prob) {
  LayerSpec l;
  l.kind = Kind::Dropout;
  l.keep_prob = keep_prob;
  return l;
}

bool operator==(const LayerSpec& a, const LayerSpec& b) {
  return a.kind == b.kind && a.filters == b.filters && a.stride == b.stride && a.fh == b.fh &&
         a.fw == b.fw && a.units == b.units && a.act == b.act && a.keep_prob == b.keep_prob;
}

bool operator==(const NetworkSpec& a, const NetworkSpec& b) {
  return a.input_shape == b.input_shape && a.layers == b.layers;
}

std::vector<std::vector<int>> NetworkSpec::infer_shapes() const {
  if (input_shape.empty()) throw ConfigError("network spec has empty input shape");
  numel_of(input_shape);  // validates positive dims
  if (layers.empty()) throw ConfigError("network spec has no layers");

  std::vector<std::vector<int>> shapes;
  std::vector<int> cur = input_shape;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    switch (l.kind) {
      case LayerSpec::Kind::Conv: {
        if (cur.size() != 3) {
          throw ConfigError("layer " + std::to_string(i) + ": conv needs a (c,h,w) input, got " +
                            shape_str(cur));
        }
        if (l.filters <= 0 || l.stride <= 0 || l.fh <= 0 || l.fw <= 0) {
          throw ConfigError("layer " + std::to_string(i) + ": conv dimensions must be positive");
        }
        const int oh = (cur[1] - l.fh) / l.stride + 1;
        const int ow = (cur[2] - l.fw) / l.stride + 1;
        if (cur[1] < l.fh || cur[2] < l.fw || oh <= 0 || ow <= 0) {
          throw ConfigError("layer " + std::to_string(i) + ": conv filter " +
                            std::to_string(l.fh) + "x" + std::to_string(l.fw) +
                            " does not fit input " + shape_str(cur));
        }
        cur = {l.filters, oh, ow};
        break;
      }
      case LayerSpec::Kind::Fc: {
        if (l.units <= 0) {
          throw ConfigError("layer " + std::to_string(i) + ": fc units must be positive");
        }
        cur = {l.units};
        break;
      }
      case LayerSpec::Kind::Dropout: {
        if (!(l.keep_prob > 0.0f && l.keep_prob <= 1.0f)) {
          throw ConfigError("layer " + std::to_string(i) + ": dropout keep probability " +
                            std::to_string(l.keep_prob) + " outside (0,1]");
        }
        break;
      }
    }
    shapes.push_back(cur);
  }
  return shapes;
}

int NetworkSpec::output_dim() const {
  auto shapes = infer_shapes();
  return static_cast<int>(numel_of(shapes.back()));
}

ParamList init_parameters(const NetworkSpec& spec, std::uint64_t seed) {
  auto shapes = spec.infer_shapes();
  ParamList params;
  std::vector<int> cur = spec.input_shape;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    Rng rng(split_seed(seed, i));
    const std::string tag = std::to_string(i);
    switch (l.kind) {
      case LayerSpec::Kind::Conv: {
        const int in_ch = cur[0];
        const int fan_in = in_ch * l.fh * l.fw;
        const int fan_out = l.filters * l.fh * l.fw;
        const float bound = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
        Tensor w = Tensor::zeros({l.filters, in_ch, l.fh, l.fw});
        for (float& v : w.data) v = rng.uniform(-bound, bound);
        params.emplace_back("conv" + tag + ".w", std::move(w));
        params.emplace_back("conv" + tag + ".b", Tensor::zeros({l.filters}));
        break;
      }
      case LayerSpec::Kind::Fc: {
        const int fan_in = static_cast<int>(numel_of(cur));
        const float bound = std::sqrt(6.0f / static_cast<float>(fan_in + l.units));
        Tensor w = Tensor::zeros({fan_in, l.units});
        for (float& v : w.data) v = rng.uniform(-bound, bound);
        params.emplace_back("fc" + tag + ".w", std::move(w));
        params.emplace_back("fc" + tag + ".b", Tensor::zeros({l.units}));
        break;
      }
      case LayerSpec::Kind::Dropout:
        break;
    }
    cur = shapes[i];
  }
  return params;
}

ad::Value apply_network(ad::Tape& tape, const NetworkSpec& spec, std::span<const ad::Value> params,
                        ad::Value x, bool training, Rng* dropout_rng) {
  const Tensor& xin = tape.value(x);
  if (xin.shape != spec.input_shape) {
    throw ShapeError("network input shape " + shape_str(xin.shape) + " does not match spec " +
                     shape_str(spec.input_shape));
  }

  auto activate = [&](ad::Value v, Activation a) {
    switch (a) {
      case Activation::Identity: return v;
      case Activation::LeakyRelu: return ad::leaky_relu(v);
      case Activation::Sigmoid: return ad::sigmoid(v);
      case Activation::Tanh: return ad::tanh(v);
      case Activation::Softmax: return ad::softmax(v);
    }
    throw ConfigError("unknown activation enum value");
  };

  ad::Value cur = x;
  std::size_t pi = 0;
  auto next_param = [&]() -> ad::Value {
    if (pi >= params.size()) throw ShapeError("parameter list shorter than network spec requires");
    return params[pi++];
  };

  for (const LayerSpec& l : spec.layers) {
    switch (l.kind) {
      case LayerSpec::Kind::Conv: {
        ad::Value w = next_param();
        ad::Value b = next_param();
        cur = activate(ad::bias_add(ad::conv2d(cur, w, l.stride), b), l.act);
        break;
      }
      case LayerSpec::Kind::Fc: {
        ad::Value w = next_param();
        ad::Value b = next_param();
        const int n = static_cast<int>(tape.value(cur).numel());
        cur = ad::reshape(cur, {1, n});
        cur = ad::matmul(cur, w);
        cur = ad::reshape(cur, {l.units});
        cur = activate(ad::bias_add(cur, b), l.act);
        break;
      }
      case LayerSpec::Kind::Dropout: {
        if (training && l.keep_prob < 1.0f) {
          if (dropout_rng == nullptr) {
            throw ConfigError("training-mode forward through dropout needs an RNG");
          }
          const Tensor& shape_src = tape.value(cur);
          Tensor mask = Tensor::zeros(shape_src.shape);
          const float inv_keep = 1.0f / l.keep_prob;
          for (float& v : mask.data) {
            v = dropout_rng->bernoulli(l.keep_prob) ? inv_keep : 0.0f;
          }
          cur = ad::multiply(cur, tape.constant(std::move(mask)));
        }
        break;
      }
    }
  }
  if (pi != params.size()) {
    throw ShapeError("parameter list longer than network spec requires");
  }
  return cur;
}

Tensor forward(const Checkpoint& ckpt, const Tensor& x) {
  ad::Tape tape;
  std::vector<ad::Value> params;
  params.reserve(ckpt.params.size());
  for (const auto& [name, tensor] : ckpt.params) {
    params.push_back(tape.constant(tensor));
  }
  ad::Value out = apply_network(tape, ckpt.spec, params, tape.constant(x), false, nullptr);
  return tape.value(out);
}

float cross_entropy(const Tensor& pred, const Tensor& target) {
  if (pred.numel() != target.numel()) {
    throw ShapeError("cross_entropy: length mismatch " + shape_str(pred.shape) + " vs " +
                     shape_str(target.shape));
  }
  auto check_dist = [](const Tensor& t, const char* which) {
    double s = 0.0;
    for (float v : t.data) s += v;
    if (std::abs(s - 1.0) > 1e-4) {
      throw ShapeError(std::string("cross_entropy: ") + which + " sums to " + std::to_string(s) +
                       ", expected 1");
    }
  };
  check_dist(pred, "prediction");
  check_dist(target, "target");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double p = std::max(static_cast<double>(pred.data[i]), 1e-12);
    acc -= static_cast<double>(target.data[i]) * std::log(p);
  }
  return static_cast<float>(acc);
}

ad::Value cross_entropy(ad::Tape& tape, ad::Value pred, const Tensor& target) {
  const Tensor& pv = tape.value(pred);
  if (pv.numel() != target.numel()) {
    throw ShapeError("cross_entropy: length mismatch " + shape_str(pv.shape) + " vs " +
                     shape_str(target.shape));
  }
  Tensor t = target;
  t.shape = pv.shape;
  ad::Value weighted = ad::multiply(ad::log(pred), tape.constant(std::move(t)));
  return ad::scalar_multiply(ad::sum(weighted), -1.0f);
}

float entropy(const Tensor& dist) { return cross_entropy(dist, dist); }

AdamState::AdamState(const ParamList& params, AdamConfig cfg) : cfg_(cfg) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& [name, tensor] : params) {
    m_.push_back(Tensor::zeros(tensor.shape));
    v_.push_back(Tensor::zeros(tensor.shape));
  }
}

void AdamState::step(ParamList& params, std::span<const Tensor> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ShapeError("adam step: parameter/gradient count mismatch");
  }
  ++t_;
  const float bc1 = 1.0f - std::pow(cfg_.beta1, static_cast<float>(t_));
  const float bc2 = 1.0f - std::pow(cfg_.beta2, static_cast<float>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& [name, theta] = params[i];
    const Tensor& g = grads[i];
    require_same_shape(theta, g, "adam step for " + name);
    if (!all_finite(g)) {
      throw NumericError("non-finite gradient for parameter '" + name + "'");
    }
    float* mp = m_[i].data.data();
    float* vp = v_[i].data.data();
    float* tp = theta.data.data();
    const float* gp = g.data.data();
    const std::size_t n = theta.data.size();
    for (std::size_t j = 0; j < n; ++j) {
      mp[j] = cfg_.beta1 * mp[j] + (1.0f - cfg_.beta1) * gp[j];
      vp[j] = cfg_.beta2 * vp[j] + (1.0f - cfg_.beta2) * gp[j] * gp[j];
      const float mhat = mp[j] / bc1;
      const float vhat = vp[j] / bc2;
      tp[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

TrainResult train_classifier(const NetworkSpec& spec, const std::vector<Tensor>& inputs,
                             const std::vector<int>& labels, const TrainConfig& cfg) {
  if (inputs.empty()) throw ConfigError("train_classifier: empty dataset");
  if (inputs.size() != labels.size()) {
    throw ConfigError("train_classifier: input/label count mismatch");
  }
  const int num_classes = spec.output_dim();
  if (num_classes < 2) throw ConfigError("classifier output dimension must be >= 2");
  if (spec.layers.back().act != Activation::Softmax) {
    throw ConfigError("classifier spec must end with a softmax layer");
  }
  for (int l : labels) {
    if (l < 0 || l >= num_classes) {
      throw ConfigError("label " + std::to_string(l) + " outside [0," +
                        std::to_string(num_classes) + ")");
    }
  }

  ParamList params = init_parameters(spec, split_seed(cfg.seed, 0));
  Rng shuffle_rng(split_seed(cfg.seed, 1));
  Rng dropout_rng(split_seed(cfg.seed, 2));
  AdamState adam(params, AdamConfig{cfg.lr, 0.9f, 0.999f, 1e-8f});

  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();  // forces a shuffle before the first batch

  TrainResult result;
  double window_acc = 0.0;
  std::int64_t window_count = 0;

  const int batch = std::max(1, cfg.batch_size);
  for (std::int64_t it = 0; it < cfg.iterations; ++it) {
    ad::Tape tape;
    std::vector<ad::Value> pvals;
    pvals.reserve(params.size());
    for (const auto& [name, tensor] : params) pvals.push_back(tape.leaf(tensor, true));

    ad::Value total{};
    for (int b = 0; b < batch; ++b) {
      if (cursor >= order.size()) {
        shuffle_rng.shuffle(order);
        cursor = 0;
      }
      const std::size_t idx = order[cursor++];
      ad::Value out = apply_network(tape, spec, pvals, tape.constant(inputs[idx]), true,
                                    &dropout_rng);
      Tensor one_hot = Tensor::zeros({num_classes});
      one_hot.data[static_cast<std::size_t>(labels[idx])] = 1.0f;
      ad::Value ce = cross_entropy(tape, out, one_hot);
      total = (b == 0) ? ce : ad::add(total, ce);
    }
    ad::Value loss = ad::scalar_multiply(total, 1.0f / static_cast<float>(batch));
    const float loss_value = tape.value(loss).item();
    if (!std::isfinite(loss_value)) {
      throw NumericError("classifier training diverged at iteration " + std::to_string(it) +
                         " (loss not finite)");
    }
    tape.backward(loss);

    std::vector<Tensor> grads;
    grads.reserve(pvals.size());
    for (ad::Value pv : pvals) grads.push_back(tape.grad(pv));
    adam.step(params, grads);

    if (cfg.record_loss) {
      window_acc += loss_value;
      if (++window_count == 500) {
        result.window_losses.push_back(static_cast<float>(window_acc / 500.0));
        window_acc = 0.0;
        window_count = 0;
      }
    }
  }

  result.checkpoint = Checkpoint{spec, std::move(params), cfg.seed, cfg.iterations};
  return result;
}

int predict(const Checkpoint& ckpt, const Tensor& x) {
  Tensor out = forward(ckpt, x);
  int best = 0;
  for (std::size_t i = 1; i < out.data.size(); ++i) {
    if (out.data[i] > out.data[best]) best = static_cast<int>(i);
  }
  return best;
}

float accuracy(const Checkpoint& ckpt, const std::vector<Tensor>& inputs,
               const std::vector<int>& labels, int jobs) {
  if (inputs.empty()) throw ConfigError("accuracy: empty dataset");
  if (inputs.size() != labels.size()) throw ConfigError("accuracy: input/label count mismatch");
  const std::size_t n = inputs.size();
  jobs = std::max(1, jobs);
  if (jobs == 1) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (predict(ckpt, inputs[i]) == labels[i]) ++correct;
    }
    return static_cast<float>(correct) / static_cast<float>(n);
  }
  std::vector<std::size_t> corrects(static_cast<std::size_t>(jobs), 0);
  std::vector<std::thread> workers;
  for (int j = 0; j < jobs; ++j) {
    workers.emplace_back([&, j] {
      const std::size_t lo = n * static_cast<std::size_t>(j) / static_cast<std::size_t>(jobs);
      const std::size_t hi = n * static_cast<std::size_t>(j + 1) / static_cast<std::size_t>(jobs);
      std::size_t c = 0;
      for (std::size_t i = lo; i < hi; ++i) {
        if (predict(ckpt, inputs[i]) == labels[i]) ++c;
      }
      corrects[static_cast<std::size_t>(j)] = c;
    });
  }
  for (auto& w : workers) w.join();
  std::size_t correct = 0;
  for (std::size_t c : corrects) correct += c;
  return static_cast<float>(correct) / static_cast<float>(n);
}

}  // namespace lankit::nn

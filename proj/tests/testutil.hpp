#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "lankit/autodiff.hpp"
#include "lankit/rng.hpp"
#include "lankit/tensor.hpp"

namespace testutil {

using lankit::Rng;
using lankit::Tensor;
namespace ad = lankit::ad;

// Scalar-valued graph over a fixed list of inputs.
using GraphFn = std::function<ad::Value(ad::Tape&, const std::vector<ad::Value>&)>;

inline float eval_loss(const GraphFn& fn, const std::vector<Tensor>& inputs) {
  ad::Tape tape;
  std::vector<ad::Value> vals;
  vals.reserve(inputs.size());
  for (const Tensor& x : inputs) vals.push_back(tape.leaf(x, false));
  return tape.value(fn(tape, vals)).item();
}

inline std::vector<Tensor> autodiff_grads(const GraphFn& fn, const std::vector<Tensor>& inputs) {
  ad::Tape tape;
  std::vector<ad::Value> vals;
  vals.reserve(inputs.size());
  for (const Tensor& x : inputs) vals.push_back(tape.leaf(x, true));
  ad::Value loss = fn(tape, vals);
  tape.backward(loss);
  std::vector<Tensor> grads;
  for (ad::Value v : vals) {
    grads.push_back(tape.has_grad(v) ? tape.grad(v) : Tensor::zeros(tape.value(v).shape));
  }
  return grads;
}

struct GradCheckResult {
  bool ok = true;
  float worst_rel_err = 0.0f;
  std::string detail;
};

// Central finite differences (eps 1e-3) against reverse-mode gradients.
// Relative error uses max(|fd|, |ad|, 1e-6) as denominator.
inline GradCheckResult check_gradients(const GraphFn& fn, std::vector<Tensor> inputs,
                                       float tol = 1e-3f, float eps = 1e-3f) {
  GradCheckResult result;
  const std::vector<Tensor> grads = autodiff_grads(fn, inputs);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t j = 0; j < inputs[i].data.size(); ++j) {
      const float saved = inputs[i].data[j];
      inputs[i].data[j] = saved + eps;
      const double f_plus = eval_loss(fn, inputs);
      inputs[i].data[j] = saved - eps;
      const double f_minus = eval_loss(fn, inputs);
      inputs[i].data[j] = saved;
      const float fd = static_cast<float>((f_plus - f_minus) / (2.0 * eps));
      const float ad_g = grads[i].data[j];
      const float denom = std::max({std::abs(fd), std::abs(ad_g), 1e-6f});
      const float rel = std::abs(fd - ad_g) / denom;
      if (rel > result.worst_rel_err) {
        result.worst_rel_err = rel;
        result.detail = "input " + std::to_string(i) + " element " + std::to_string(j) +
                        ": fd=" + std::to_string(fd) + " ad=" + std::to_string(ad_g);
      }
      if (rel > tol) result.ok = false;
    }
  }
  return result;
}

inline Tensor random_tensor(std::vector<int> shape, Rng& rng, float lo = -1.0f, float hi = 1.0f) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (float& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

// Values in +-[0.2, 1.0]; keeps kinked ops (leaky-relu) away from 0 so the
// two-sided difference stays on one branch.
inline Tensor random_tensor_away_from_zero(std::vector<int> shape, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (float& v : t.data) {
    const float mag = rng.uniform(0.2f, 1.0f);
    v = rng.bernoulli(0.5f) ? mag : -mag;
  }
  return t;
}

// Unique scratch directory under the system temp dir; removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("lankit-test-" + tag + "-" + std::to_string(::getpid()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil

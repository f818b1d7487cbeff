#include "lankit/tensor.hpp"

#include <cmath>
#include <sstream>

namespace lankit {

std::int64_t numel_of(std::span<const int> shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError("non-positive dimension " + std::to_string(d) + " in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(std::span<const int> shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Tensor::Tensor(std::vector<int> shape_in, std::vector<float> data_in)
    : shape(std::move(shape_in)), data(std::move(data_in)) {
  if (numel_of(shape) != static_cast<std::int64_t>(data.size())) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
  }
}

Tensor Tensor::zeros(std::vector<int> shape) { return full(std::move(shape), 0.0f); }

Tensor Tensor::ones(std::vector<int> shape) { return full(std::move(shape), 1.0f); }

Tensor Tensor::full(std::vector<int> shape, float value) {
  std::vector<float> data(static_cast<std::size_t>(numel_of(shape)), value);
  return Tensor(std::move(shape), std::move(data));
}

Tensor Tensor::scalar(float value) { return Tensor({1}, {value}); }

float Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on non-scalar tensor of shape " + shape_str(shape));
  return data[0];
}

bool all_finite(const Tensor& t) {
  for (float v : t.data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void require_finite(const Tensor& t, const std::string& what) {
  if (!all_finite(t)) throw NumericError("non-finite values in " + what);
}

void require_same_shape(const Tensor& a, const Tensor& b, const std::string& op) {
  if (!a.same_shape(b)) {
    throw ShapeError(op + ": shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  }
}

float mean_of(const Tensor& t) {
  if (t.data.empty()) throw ShapeError("mean_of: empty tensor");
  double acc = 0.0;
  for (float v : t.data) acc += v;
  return static_cast<float>(acc / static_cast<double>(t.data.size()));
}

}  // namespace lankit

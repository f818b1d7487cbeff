#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lankit/errors.hpp"

namespace lankit {

// Dense row-major float32 tensor. Plain value type: copies copy the data,
// there are no views. Everything in the library runs on these.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> data;

  Tensor() = default;
  Tensor(std::vector<int> shape, std::vector<float> data);

  static Tensor zeros(std::vector<int> shape);
  static Tensor ones(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, float value);
  static Tensor scalar(float value);

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  // Value of a 1-element tensor.
  float item() const;
};

std::int64_t numel_of(std::span<const int> shape);
std::string shape_str(std::span<const int> shape);

bool all_finite(const Tensor& t);
void require_finite(const Tensor& t, const std::string& what);
void require_same_shape(const Tensor& a, const Tensor& b, const std::string& op);

float mean_of(const Tensor& t);

}  // namespace lankit

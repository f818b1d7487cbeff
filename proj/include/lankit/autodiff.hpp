#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "lankit/tensor.hpp"

namespace lankit::ad {

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy.
struct Value {
  Tape* tape = nullptr;
  int id = -1;
};

// Append-only record of a forward computation. Nodes are stored in creation
// order, which is a topological order by construction, so backward() is a
// single reverse sweep. One tape per training step; tapes are not shared
// across threads.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Enters a tensor into the graph. requires_grad marks trainable leaves;
  // everything reachable from one inherits it.
  Value leaf(Tensor value, bool requires_grad = false);
  Value constant(Tensor value) { return leaf(std::move(value), false); }

  const Tensor& value(Value v) const { return node(v.id).value; }
  bool requires_grad(Value v) const { return node(v.id).requires_grad; }
  bool has_grad(Value v) const { return node(v.id).grad.has_value(); }
  const Tensor& grad(Value v) const;

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse, filling the
  // gradient slot of every node the loss depends on. loss must be scalar.
  void backward(Value loss);

  int size() const { return static_cast<int>(nodes_.size()); }

  // --- used by operation implementations ---
  Value emit(Tensor value, std::vector<int> inputs, BackwardFn backward);
  void accumulate(int id, const Tensor& contribution);
  const Tensor& node_value(int id) const { return node(id).value; }
  const Tensor& node_grad(int id) const;
  bool node_requires_grad(int id) const { return node(id).requires_grad; }

 private:
  struct Node {
    Tensor value;
    std::vector<int> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    std::optional<Tensor> grad;
  };

  const Node& node(int id) const;
  Node& node(int id);

  std::vector<Node> nodes_;
};

// Operation set. Every op validates its input shapes, records the result on
// the tape and installs a backward rule.
Value add(Value a, Value b);
Value subtract(Value a, Value b);
Value multiply(Value a, Value b);
Value scalar_multiply(Value a, float s);
Value matmul(Value a, Value b);                     // (m,k) x (k,n) -> (m,n)
// x: (in_ch, h, w); filter: (out_ch, in_ch, fh, fw); valid padding.
Value conv2d(Value x, Value filter, int stride);
Value bias_add(Value x, Value bias);                // (n)+(n) or (c,h,w)+(c)
Value leaky_relu(Value x);                          // negative slope 0.1
Value sigmoid(Value x);
Value tanh(Value x);
Value softmax(Value x);                             // last axis, max-subtracted
Value log(Value x);                                 // argument clamped at 1e-12
Value sum(Value x);                                 // -> scalar
Value mean(Value x);                                // -> scalar
Value reshape(Value x, std::vector<int> shape);
Value concat(std::span<const Value> parts, int axis);

inline constexpr float kLeakyReluSlope = 0.1f;
inline constexpr float kLogFloor = 1e-12f;

}  // namespace lankit::ad

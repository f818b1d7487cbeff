#include "lankit/autodiff.hpp"

#include <cmath>
#include <cstddef>
#include <utility>

namespace lankit::ad {

namespace {

void check_same_tape(Value a, Value b, const char* op) {
  if (a.tape == nullptr || b.tape == nullptr || a.tape != b.tape) {
    throw ShapeError(std::string(op) + ": operands recorded on different tapes");
  }
}

}  // namespace

const Tape::Node& Tape::node(int id) const {
  if (id < 0 || id >= static_cast<int>(nodes_.size())) {
    throw ShapeError("invalid tape node id " + std::to_string(id));
  }
  return nodes_[static_cast<std::size_t>(id)];
}

Tape::Node& Tape::node(int id) {
  if (id < 0 || id >= static_cast<int>(nodes_.size())) {
    throw ShapeError("invalid tape node id " + std::to_string(id));
  }
  return nodes_[static_cast<std::size_t>(id)];
}

Value Tape::leaf(Tensor value, bool requires_grad) {
  require_finite(value, "tape leaf");
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Value{this, static_cast<int>(nodes_.size()) - 1};
}

Value Tape::emit(Tensor value, std::vector<int> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.inputs = std::move(inputs);
  for (int in : n.inputs) {
    if (node(in).requires_grad) {
      n.requires_grad = true;
      break;
    }
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Value{this, static_cast<int>(nodes_.size()) - 1};
}

const Tensor& Tape::grad(Value v) const { return node_grad(v.id); }

const Tensor& Tape::node_grad(int id) const {
  const Node& n = node(id);
  if (!n.grad.has_value()) {
    throw ShapeError("node " + std::to_string(id) + " has no gradient; run backward() first");
  }
  return *n.grad;
}

void Tape::accumulate(int id, const Tensor& contribution) {
  Node& n = node(id);
  if (!n.requires_grad) return;
  if (!n.grad.has_value()) {
    n.grad = Tensor::zeros(n.value.shape);
  }
  require_same_shape(*n.grad, contribution, "gradient accumulation");
  float* g = n.grad->data.data();
  const float* c = contribution.data.data();
  const std::size_t count = n.grad->data.size();
  for (std::size_t i = 0; i < count; ++i) g[i] += c[i];
}

void Tape::backward(Value loss) {
  if (loss.tape != this) throw ShapeError("backward: loss recorded on a different tape");
  Node& root = node(loss.id);
  if (root.value.numel() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + shape_str(root.value.shape));
  }
  root.grad = Tensor::ones(root.value.shape);
  for (int id = loss.id; id >= 0; --id) {
    Node& n = node(id);
    if (n.grad.has_value() && n.backward) {
      n.backward(*this, id);
    }
  }
}

// ---------------------------------------------------------------------------
// operations

namespace {

// Elementwise binary op with per-element backward factors supplied lazily.
template <typename Fwd, typename Bwd>
Value elementwise_binary(Value a, Value b, const char* name, Fwd fwd, Bwd bwd) {
  check_same_tape(a, b, name);
  Tape& t = *a.tape;
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  require_same_shape(av, bv, name);
  Tensor out = Tensor::zeros(av.shape);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = fwd(av.data[i], bv.data[i]);
  }
  int aid = a.id, bid = b.id;
  return t.emit(std::move(out), {aid, bid}, [aid, bid, bwd](Tape& tp, int self) {
    const Tensor& g = tp.node_grad(self);
    const Tensor& av2 = tp.node_value(aid);
    const Tensor& bv2 = tp.node_value(bid);
    Tensor ga = Tensor::zeros(av2.shape);
    Tensor gb = Tensor::zeros(bv2.shape);
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      auto [da, db] = bwd(av2.data[i], bv2.data[i]);
      ga.data[i] = g.data[i] * da;
      gb.data[i] = g.data[i] * db;
    }
    tp.accumulate(aid, ga);
    tp.accumulate(bid, gb);
  });
}

// Elementwise unary op; derivative receives (x, y).
template <typename Fwd, typename Bwd>
Value elementwise_unary(Value x, const char* name, Fwd fwd, Bwd bwd) {
  if (x.tape == nullptr) throw ShapeError(std::string(name) + ": null value");
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  Tensor out = Tensor::zeros(xv.shape);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = fwd(xv.data[i]);
  }
  int xid = x.id;
  return t.emit(std::move(out), {xid}, [xid, bwd](Tape& tp, int self) {
    const Tensor& g = tp.node_grad(self);
    const Tensor& xv2 = tp.node_value(xid);
    const Tensor& yv = tp.node_value(self);
    Tensor gx = Tensor::zeros(xv2.shape);
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      gx.data[i] = g.data[i] * bwd(xv2.data[i], yv.data[i]);
    }
    tp.accumulate(xid, gx);
  });
}

}  // namespace

Value add(Value a, Value b) {
  return elementwise_binary(
      a, b, "add", [](float x, float y) { return x + y; },
      [](float, float) { return std::pair<float, float>{1.0f, 1.0f}; });
}

Value subtract(Value a, Value b) {
  return elementwise_binary(
      a, b, "subtract", [](float x, float y) { return x - y; },
      [](float, float) { return std::pair<float, float>{1.0f, -1.0f}; });
}

Value multiply(Value a, Value b) {
  return elementwise_binary(
      a, b, "multiply", [](float x, float y) { return x * y; },
      [](float x, float y) { return std::pair<float, float>{y, x}; });
}

Value scalar_multiply(Value a, float s) {
  return elementwise_unary(
      a, "scalar_multiply", [s](float x) { return s * x; },
      [s](float, float) { return s; });
}

Value matmul(Value a, Value b) {
  check_same_tape(a, b, "matmul");
  Tape& t = *a.tape;
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  if (av.rank() != 2 || bv.rank() != 2) {
    throw ShapeError("matmul: expects rank-2 operands, got " + shape_str(av.shape) + " and " +
                     shape_str(bv.shape));
  }
  const int m = av.shape[0], k = av.shape[1];
  const int k2 = bv.shape[0], n = bv.shape[1];
  if (k != k2) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_str(av.shape) + " vs " +
                     shape_str(bv.shape));
  }
  Tensor out = Tensor::zeros({m, n});
  {
    const float* A = av.data.data();
    const float* B = bv.data.data();
    float* C = out.data.data();
    for (int i = 0; i < m; ++i) {
      for (int p = 0; p < k; ++p) {
        const float aip = A[i * k + p];
        const float* Brow = B + p * n;
        float* Crow = C + i * n;
        for (int j = 0; j < n; ++j) Crow[j] += aip * Brow[j];
      }
    }
  }
  int aid = a.id, bid = b.id;
  return t.emit(std::move(out), {aid, bid}, [aid, bid, m, k, n](Tape& tp, int self) {
    const float* G = tp.node_grad(self).data.data();
    const float* A = tp.node_value(aid).data.data();
    const float* B = tp.node_value(bid).data.data();
    if (tp.node_requires_grad(aid)) {
      Tensor ga = Tensor::zeros({m, k});
      float* GA = ga.data.data();
      // dA = G * B^T
      for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
          const float* Grow = G + i * n;
          const float* Brow = B + p * n;
          float acc = 0.0f;
          for (int j = 0; j < n; ++j) acc += Grow[j] * Brow[j];
          GA[i * k + p] = acc;
        }
      }
      tp.accumulate(aid, ga);
    }
    if (tp.node_requires_grad(bid)) {
      Tensor gb = Tensor::zeros({k, n});
      float* GB = gb.data.data();
      // dB = A^T * G
      for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
          const float aip = A[i * k + p];
          const float* Grow = G + i * n;
          float* GBrow = GB + p * n;
          for (int j = 0; j < n; ++j) GBrow[j] += aip * Grow[j];
        }
      }
      tp.accumulate(bid, gb);
    }
  });
}

Value conv2d(Value x, Value filter, int stride) {
  check_same_tape(x, filter, "conv2d");
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  const Tensor& wv = t.value(filter);
  if (xv.rank() != 3) {
    throw ShapeError("conv2d: input must be (channels,height,width), got " + shape_str(xv.shape));
  }
  if (wv.rank() != 4) {
    throw ShapeError("conv2d: filter must be (out_ch,in_ch,fh,fw), got " + shape_str(wv.shape));
  }
  if (stride < 1) throw ShapeError("conv2d: stride must be >= 1, got " + std::to_string(stride));
  const int ic = xv.shape[0], h = xv.shape[1], w = xv.shape[2];
  const int oc = wv.shape[0], fic = wv.shape[1], fh = wv.shape[2], fw = wv.shape[3];
  if (ic != fic) {
    throw ShapeError("conv2d: input channels " + std::to_string(ic) + " do not match filter in_ch " +
                     std::to_string(fic));
  }
  if (h < fh || w < fw) {
    throw ShapeError("conv2d: input " + shape_str(xv.shape) + " smaller than filter " +
                     shape_str(wv.shape));
  }
  const int oh = (h - fh) / stride + 1;
  const int ow = (w - fw) / stride + 1;

  Tensor out = Tensor::zeros({oc, oh, ow});
  {
    const float* X = xv.data.data();
    const float* W = wv.data.data();
    float* O = out.data.data();
    for (int o = 0; o < oc; ++o) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          float acc = 0.0f;
          for (int c = 0; c < ic; ++c) {
            for (int fy = 0; fy < fh; ++fy) {
              const float* xrow = X + (c * h + (oy * stride + fy)) * w + ox * stride;
              const float* wrow = W + ((o * ic + c) * fh + fy) * fw;
              for (int fx = 0; fx < fw; ++fx) acc += xrow[fx] * wrow[fx];
            }
          }
          O[(o * oh + oy) * ow + ox] = acc;
        }
      }
    }
  }
  int xid = x.id, wid = filter.id;
  return t.emit(std::move(out), {xid, wid},
                [xid, wid, stride, ic, h, w, oc, fh, fw, oh, ow](Tape& tp, int self) {
    const float* G = tp.node_grad(self).data.data();
    const float* X = tp.node_value(xid).data.data();
    const float* W = tp.node_value(wid).data.data();
    if (tp.node_requires_grad(xid)) {
      Tensor gx = Tensor::zeros({ic, h, w});
      float* GX = gx.data.data();
      for (int o = 0; o < oc; ++o) {
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox) {
            const float g = G[(o * oh + oy) * ow + ox];
            if (g == 0.0f) continue;
            for (int c = 0; c < ic; ++c) {
              for (int fy = 0; fy < fh; ++fy) {
                float* gxrow = GX + (c * h + (oy * stride + fy)) * w + ox * stride;
                const float* wrow = W + ((o * ic + c) * fh + fy) * fw;
                for (int fx = 0; fx < fw; ++fx) gxrow[fx] += g * wrow[fx];
              }
            }
          }
        }
      }
      tp.accumulate(xid, gx);
    }
    if (tp.node_requires_grad(wid)) {
      Tensor gw = Tensor::zeros({oc, ic, fh, fw});
      float* GW = gw.data.data();
      for (int o = 0; o < oc; ++o) {
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox) {
            const float g = G[(o * oh + oy) * ow + ox];
            if (g == 0.0f) continue;
            for (int c = 0; c < ic; ++c) {
              for (int fy = 0; fy < fh; ++fy) {
                const float* xrow = X + (c * h + (oy * stride + fy)) * w + ox * stride;
                float* gwrow = GW + ((o * ic + c) * fh + fy) * fw;
                for (int fx = 0; fx < fw; ++fx) gwrow[fx] += g * xrow[fx];
              }
            }
          }
        }
      }
      tp.accumulate(wid, gw);
    }
  });
}

Value bias_add(Value x, Value bias) {
  check_same_tape(x, bias, "bias_add");
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  const Tensor& bv = t.value(bias);
  if (bv.rank() != 1) {
    throw ShapeError("bias_add: bias must be rank 1, got " + shape_str(bv.shape));
  }
  if (xv.rank() == 1) {
    if (xv.shape[0] != bv.shape[0]) {
      throw ShapeError("bias_add: length mismatch " + shape_str(xv.shape) + " vs " +
                       shape_str(bv.shape));
    }
    Tensor out = Tensor::zeros(xv.shape);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = xv.data[i] + bv.data[i];
    int xid = x.id, bid = bias.id;
    return t.emit(std::move(out), {xid, bid}, [xid, bid](Tape& tp, int self) {
      const Tensor& g = tp.node_grad(self);
      tp.accumulate(xid, g);
      tp.accumulate(bid, g);
    });
  }
  if (xv.rank() == 2) {
    const int m = xv.shape[0], n = xv.shape[1];
    if (bv.shape[0] != n) {
      throw ShapeError("bias_add: bias length " + std::to_string(bv.shape[0]) +
                       " does not match row width " + std::to_string(n));
    }
    Tensor out = Tensor::zeros(xv.shape);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        out.data[static_cast<std::size_t>(i) * n + j] =
            xv.data[static_cast<std::size_t>(i) * n + j] + bv.data[static_cast<std::size_t>(j)];
      }
    }
    int xid = x.id, bid = bias.id;
    return t.emit(std::move(out), {xid, bid}, [xid, bid, m, n](Tape& tp, int self) {
      const Tensor& g = tp.node_grad(self);
      tp.accumulate(xid, g);
      if (tp.node_requires_grad(bid)) {
        Tensor gb = Tensor::zeros({n});
        for (int i = 0; i < m; ++i) {
          for (int j = 0; j < n; ++j) {
            gb.data[static_cast<std::size_t>(j)] += g.data[static_cast<std::size_t>(i) * n + j];
          }
        }
        tp.accumulate(bid, gb);
      }
    });
  }
  if (xv.rank() == 3) {
    const int c = xv.shape[0], h = xv.shape[1], w = xv.shape[2];
    if (bv.shape[0] != c) {
      throw ShapeError("bias_add: bias length " + std::to_string(bv.shape[0]) +
                       " does not match channel count " + std::to_string(c));
    }
    Tensor out = Tensor::zeros(xv.shape);
    for (int ch = 0; ch < c; ++ch) {
      const float b = bv.data[static_cast<std::size_t>(ch)];
      const std::size_t base = static_cast<std::size_t>(ch) * h * w;
      for (int i = 0; i < h * w; ++i) out.data[base + i] = xv.data[base + i] + b;
    }
    int xid = x.id, bid = bias.id;
    return t.emit(std::move(out), {xid, bid}, [xid, bid, c, h, w](Tape& tp, int self) {
      const Tensor& g = tp.node_grad(self);
      tp.accumulate(xid, g);
      if (tp.node_requires_grad(bid)) {
        Tensor gb = Tensor::zeros({c});
        for (int ch = 0; ch < c; ++ch) {
          const std::size_t base = static_cast<std::size_t>(ch) * h * w;
          float acc = 0.0f;
          for (int i = 0; i < h * w; ++i) acc += g.data[base + i];
          gb.data[static_cast<std::size_t>(ch)] = acc;
        }
        tp.accumulate(bid, gb);
      }
    });
  }
  throw ShapeError("bias_add: unsupported input shape " + shape_str(xv.shape));
}

Value leaky_relu(Value x) {
  return elementwise_unary(
      x, "leaky_relu",
      [](float v) { return v > 0.0f ? v : kLeakyReluSlope * v; },
      [](float v, float) { return v > 0.0f ? 1.0f : kLeakyReluSlope; });
}

Value sigmoid(Value x) {
  return elementwise_unary(
      x, "sigmoid", [](float v) { return 1.0f / (1.0f + std::exp(-v)); },
      [](float, float y) { return y * (1.0f - y); });
}

Value tanh(Value x) {
  return elementwise_unary(
      x, "tanh", [](float v) { return std::tanh(v); },
      [](float, float y) { return 1.0f - y * y; });
}

Value log(Value x) {
  return elementwise_unary(
      x, "log",
      [](float v) { return std::log(v < kLogFloor ? kLogFloor : v); },
      [](float v, float) { return 1.0f / (v < kLogFloor ? kLogFloor : v); });
}

Value softmax(Value x) {
  if (x.tape == nullptr) throw ShapeError("softmax: null value");
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  if (xv.rank() < 1) throw ShapeError("softmax: needs at least one axis");
  const int last = xv.shape.back();
  const std::size_t rows = xv.data.size() / static_cast<std::size_t>(last);
  Tensor out = Tensor::zeros(xv.shape);
  for (std::size_t r = 0; r < rows; ++r) {
    const float* in = xv.data.data() + r * last;
    float* o = out.data.data() + r * last;
    float mx = in[0];
    for (int j = 1; j < last; ++j) mx = std::max(mx, in[j]);
    float denom = 0.0f;
    for (int j = 0; j < last; ++j) {
      o[j] = std::exp(in[j] - mx);
      denom += o[j];
    }
    for (int j = 0; j < last; ++j) o[j] /= denom;
  }
  int xid = x.id;
  return t.emit(std::move(out), {xid}, [xid, last, rows](Tape& tp, int self) {
    const Tensor& g = tp.node_grad(self);
    const Tensor& y = tp.node_value(self);
    Tensor gx = Tensor::zeros(tp.node_value(xid).shape);
    for (std::size_t r = 0; r < rows; ++r) {
      const float* grow = g.data.data() + r * last;
      const float* yrow = y.data.data() + r * last;
      float* gxrow = gx.data.data() + r * last;
      float dot = 0.0f;
      for (int j = 0; j < last; ++j) dot += grow[j] * yrow[j];
      for (int j = 0; j < last; ++j) gxrow[j] = yrow[j] * (grow[j] - dot);
    }
    tp.accumulate(xid, gx);
  });
}

Value sum(Value x) {
  if (x.tape == nullptr) throw ShapeError("sum: null value");
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  double acc = 0.0;
  for (float v : xv.data) acc += v;
  int xid = x.id;
  return t.emit(Tensor::scalar(static_cast<float>(acc)), {xid}, [xid](Tape& tp, int self) {
    const float g = tp.node_grad(self).data[0];
    tp.accumulate(xid, Tensor::full(tp.node_value(xid).shape, g));
  });
}

Value mean(Value x) {
  if (x.tape == nullptr) throw ShapeError("mean: null value");
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  const float inv = 1.0f / static_cast<float>(xv.numel());
  double acc = 0.0;
  for (float v : xv.data) acc += v;
  int xid = x.id;
  return t.emit(Tensor::scalar(static_cast<float>(acc * inv)), {xid},
                [xid, inv](Tape& tp, int self) {
    const float g = tp.node_grad(self).data[0];
    tp.accumulate(xid, Tensor::full(tp.node_value(xid).shape, g * inv));
  });
}

Value reshape(Value x, std::vector<int> shape) {
  if (x.tape == nullptr) throw ShapeError("reshape: null value");
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  if (numel_of(shape) != xv.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(xv.shape) + " as " + shape_str(shape));
  }
  Tensor out(shape, xv.data);
  int xid = x.id;
  return t.emit(std::move(out), {xid}, [xid](Tape& tp, int self) {
    const Tensor& g = tp.node_grad(self);
    tp.accumulate(xid, Tensor(tp.node_value(xid).shape, g.data));
  });
}

Value concat(std::span<const Value> parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Tape& t = *parts[0].tape;
  for (const Value& p : parts) check_same_tape(parts[0], p, "concat");

  const Tensor& first = t.value(parts[0]);
  const int rank = first.rank();
  if (axis < 0 || axis >= rank) {
    throw ShapeError("concat: axis " + std::to_string(axis) + " out of range for rank " +
                     std::to_string(rank));
  }
  std::vector<int> out_shape = first.shape;
  int axis_total = 0;
  for (const Value& p : parts) {
    const Tensor& pv = t.value(p);
    if (pv.rank() != rank) throw ShapeError("concat: rank mismatch");
    for (int d = 0; d < rank; ++d) {
      if (d != axis && pv.shape[d] != first.shape[d]) {
        throw ShapeError("concat: shape mismatch on axis " + std::to_string(d) + ": " +
                         shape_str(first.shape) + " vs " + shape_str(pv.shape));
      }
    }
    axis_total += pv.shape[axis];
  }
  out_shape[axis] = axis_total;

  // outer = product of dims before axis, inner = product after.
  std::int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= first.shape[d];
  for (int d = axis + 1; d < rank; ++d) inner *= first.shape[d];

  Tensor out = Tensor::zeros(out_shape);
  std::vector<int> ids;
  std::vector<int> axis_sizes;
  ids.reserve(parts.size());
  for (const Value& p : parts) {
    ids.push_back(p.id);
    axis_sizes.push_back(t.value(p).shape[axis]);
  }
  {
    std::int64_t offset = 0;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
      const Tensor& pv = t.value(parts[pi]);
      const std::int64_t block = static_cast<std::int64_t>(axis_sizes[pi]) * inner;
      for (std::int64_t o = 0; o < outer; ++o) {
        const float* src = pv.data.data() + o * block;
        float* dst = out.data.data() + o * axis_total * inner + offset;
        for (std::int64_t i = 0; i < block; ++i) dst[i] = src[i];
      }
      offset += block;
    }
  }
  return t.emit(std::move(out), ids,
                [ids, axis_sizes, outer, inner, axis_total](Tape& tp, int self) {
    const Tensor& g = tp.node_grad(self);
    std::int64_t offset = 0;
    for (std::size_t pi = 0; pi < ids.size(); ++pi) {
      const std::int64_t block = static_cast<std::int64_t>(axis_sizes[pi]) * inner;
      if (tp.node_requires_grad(ids[pi])) {
        Tensor gp = Tensor::zeros(tp.node_value(ids[pi]).shape);
        for (std::int64_t o = 0; o < outer; ++o) {
          const float* src = g.data.data() + o * axis_total * inner + offset;
          float* dst = gp.data.data() + o * block;
          for (std::int64_t i = 0; i < block; ++i) dst[i] = src[i];
        }
        tp.accumulate(ids[pi], gp);
      }
      offset += block;
    }
  });
}

}  // namespace lankit::ad

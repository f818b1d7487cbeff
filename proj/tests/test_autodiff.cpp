#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "lankit/autodiff.hpp"
#include "testutil.hpp"

using lankit::NumericError;
using lankit::Rng;
using lankit::ShapeError;
using lankit::Tensor;
namespace ad = lankit::ad;
using testutil::check_gradients;
using testutil::GraphFn;
using testutil::random_tensor;
using testutil::random_tensor_away_from_zero;

namespace {

// Scalarizes an op output against fixed positive weights so every element
// contributes a healthy gradient.
GraphFn weighted(const std::function<ad::Value(ad::Tape&, const std::vector<ad::Value>&)>& body,
                 Tensor weights) {
  return [body, weights](ad::Tape& t, const std::vector<ad::Value>& in) {
    ad::Value out = body(t, in);
    return ad::sum(ad::multiply(out, t.constant(weights)));
  };
}

Tensor weights_for(const std::vector<int>& shape, std::uint64_t seed, float lo = 0.5f,
                   float hi = 1.5f) {
  Rng rng(seed);
  return testutil::random_tensor(shape, rng, lo, hi);
}

}  // namespace

TEST_CASE("matmul forward matches hand arithmetic") {
  ad::Tape t;
  ad::Value a = t.constant(Tensor({2, 2}, {1, 2, 3, 4}));
  ad::Value b = t.constant(Tensor({2, 1}, {1, 1}));
  const Tensor& out = t.value(ad::matmul(a, b));
  CHECK(out.shape == std::vector<int>{2, 1});
  CHECK(out.data[0] == doctest::Approx(3.0f));
  CHECK(out.data[1] == doctest::Approx(7.0f));
}

TEST_CASE("conv2d of all-ones 2x2 with all-ones 2x2 filter gives 4") {
  ad::Tape t;
  ad::Value x = t.constant(Tensor::ones({1, 2, 2}));
  ad::Value w = t.constant(Tensor::ones({1, 1, 2, 2}));
  const Tensor& out = t.value(ad::conv2d(x, w, 1));
  CHECK(out.shape == std::vector<int>{1, 1, 1});
  CHECK(out.data[0] == doctest::Approx(4.0f));
}

TEST_CASE("softmax matches a high-precision oracle and is a distribution") {
  ad::Tape t;
  ad::Value x = t.constant(Tensor({3}, {1, 2, 3}));
  const Tensor& out = t.value(ad::softmax(x));

  // independent double-precision evaluation
  double e[3], denom = 0.0;
  for (int i = 0; i < 3; ++i) {
    e[i] = std::exp(static_cast<double>(i + 1) - 3.0);
    denom += e[i];
  }
  for (int i = 0; i < 3; ++i) {
    CHECK(out.data[i] == doctest::Approx(e[i] / denom).epsilon(1e-5));
  }
  CHECK(out.data[0] == doctest::Approx(0.09003057).epsilon(1e-4));
  CHECK(out.data[1] == doctest::Approx(0.24472847).epsilon(1e-4));
  CHECK(out.data[2] == doctest::Approx(0.66524096).epsilon(1e-4));

  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    ad::Tape t2;
    const Tensor& sm = t2.value(ad::softmax(t2.constant(random_tensor({7}, rng, -4.0f, 4.0f))));
    double total = 0.0;
    for (float v : sm.data) {
      CHECK(v > 0.0f);
      CHECK(v < 1.0f);
      total += v;
    }
    CHECK(std::abs(total - 1.0) < 1e-6);
  }
}

TEST_CASE("leaky relu slope") {
  ad::Tape t;
  const Tensor& out = t.value(ad::leaky_relu(t.constant(Tensor({2}, {-1.0f, 1.0f}))));
  CHECK(out.data[0] == doctest::Approx(-0.1f));
  CHECK(out.data[1] == doctest::Approx(1.0f));
}

TEST_CASE("conv2d with a 1x1 identity filter reproduces its input") {
  Rng rng(5);
  Tensor x = random_tensor({1, 6, 5}, rng);
  ad::Tape t;
  const Tensor& out = t.value(ad::conv2d(t.constant(x), t.constant(Tensor::ones({1, 1, 1, 1})), 1));
  CHECK(out.shape == x.shape);
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    CHECK(out.data[i] == x.data[i]);  // bitwise
  }
}

TEST_CASE("forward evaluation is deterministic") {
  Rng rng(17);
  Tensor x = random_tensor({2, 8, 8}, rng);
  Tensor w = random_tensor({3, 2, 3, 3}, rng);
  auto run = [&]() {
    ad::Tape t;
    ad::Value out = ad::conv2d(t.constant(x), t.constant(w), 2);
    out = ad::softmax(ad::reshape(ad::leaky_relu(out), {27}));
    return t.value(out);
  };
  const Tensor a = run();
  const Tensor b = run();
  CHECK(a.data == b.data);
}

TEST_CASE("backward of mean distributes evenly") {
  ad::Tape t;
  ad::Value x = t.leaf(Tensor({4}, {1, 2, 3, 4}), true);
  t.backward(ad::mean(x));
  const Tensor& g = t.grad(x);
  for (float v : g.data) CHECK(v == doctest::Approx(0.25f));
}

TEST_CASE("backward of sum of squares is 2x") {
  ad::Tape t;
  ad::Value x = t.leaf(Tensor({2}, {1, 2}), true);
  t.backward(ad::sum(ad::multiply(x, x)));
  const Tensor& g = t.grad(x);
  CHECK(g.data[0] == doctest::Approx(2.0f));
  CHECK(g.data[1] == doctest::Approx(4.0f));
}

TEST_CASE("backward rejects non-scalar losses") {
  ad::Tape t;
  ad::Value x = t.leaf(Tensor({3}, {1, 2, 3}), true);
  CHECK_THROWS_AS(t.backward(ad::multiply(x, x)), ShapeError);
}

TEST_CASE("shape and domain errors") {
  ad::Tape t;
  ad::Value a = t.constant(Tensor::ones({2, 3}));
  ad::Value b = t.constant(Tensor::ones({2, 3}));
  CHECK_THROWS_AS(ad::matmul(a, b), ShapeError);
  CHECK_THROWS_AS(ad::add(a, t.constant(Tensor::ones({3, 2}))), ShapeError);
  CHECK_THROWS_AS(ad::conv2d(a, b, 1), ShapeError);
  CHECK_THROWS_AS(t.leaf(Tensor({1}, {std::nanf("")})), NumericError);
}

TEST_CASE("gradients match finite differences for every op") {
  Rng rng(101);

  SUBCASE("add") {
    auto fn = weighted([](ad::Tape&, const std::vector<ad::Value>& in) { return ad::add(in[0], in[1]); },
                       weights_for({2, 3}, 1));
    auto r = check_gradients(fn, {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)});
    CHECK_MESSAGE(r.ok, r.detail);
  }
  SUBCASE("subtract") {
    auto fn = weighted(
        [](ad::Tape&, const std::vector<ad::Value>& in) { return ad::subtract(in[0], in[1]); },
        weights_for({2, 3}, 2));
    auto r = check_gradients(fn, {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)});
    CHECK_MESSAGE(r.ok, r.detail);
  }
  SUBCASE("multiply") {
    auto fn = weighted(
        [](ad::Tape&, const std::vector<ad::Value>& in) { return ad::multiply(in[0], in[1]); },
        weights_for({2, 3}, 3));
    auto r = check_gradients(fn, {random_tensor_away_from_zero({2, 3}, rng),
                                  random_tensor_away_from_zero({2, 3}, rng)});
    CHECK_MESSAGE(r.ok, r.detail);
  }
  SUBCASE("scalar_multiply") {
    auto fn = weighted(
        [](ad::Tape&, const std::vector<ad::Value>& in) { return ad::scalar_multiply(in[0], -1.7f); },
        weights_for({5}, 4));
    auto r = check_gradients(fn, {random_tensor({5}, rng)});
    CHECK_MESSAGE(r.ok, r.detail);
  }
  SUBCASE("matmul") {
    auto fn = weighted(
        [](ad::Tape&, const std::vector<ad::Value>& in) { return ad::matmul(in[0], in[1]); },
        weights_for({2, 2}, 5));
    auto r = check_gradients(fn, {random_tensor({2, 3}, rng), random_tensor({3, 2}, rng)});
    CHECK_MESSAGE(r.ok, r.detail);
  }
  SUBCASE("conv2d stride 1") {
    // positive operands keep gradient sums cancellation-free, and the small
    // fixture keeps the loss scale close to the per-element gradient scale,
    // so the float32 finite-difference noise stays well under the tolerance
    auto fn = weighted(
        [](ad::Tape&, const std::vector<ad::Value>& in) { return ad::conv2d(in[0], in[1], 1); },
        weights_for({1, 2, 2}, 6));
    auto r = check_gradients(fn, {random_tensor({1, 3, 3}, rng, 0.5f, 1.0f),
                                  random_tensor({1, 1, 2, 2}, rng, 0.5f, 1.0f)});
    CHECK_MESSAGE(r.ok, r.detail);
  }
  SUBCASE("conv2d stride 2") {
    auto fn = weighted(
        [](ad::Tape&, const std::vector<ad::Value>& in) { return ad::conv2d(in[0], in[1], 2); },
        weights_for({2, 2, 2}, 7));
    auto r = check_gradients(fn, {random_tensor({1, 4, 4}, rng, 0.5f, 1.0f),
                                  random_tensor({2, 1, 2, 2}, rng, 0.5f, 1.0f)});
    CHECK_MESSAGE(r.ok, r.detail);
  }
  SUBCASE("bias_add vector") {
    auto fn = weighted(
        [](ad::Tape&, const std::vector<ad::Value>& in) { return ad::bias_add(in[0], in[1]); },
        weights_for({6}, 8));
    auto r = check_gradients(fn, {random_tensor({6}, rng), random_tensor({6}, rng)});
    CHECK_MESSAGE(r.ok, r.detail);
  }
  SUBCASE("bias_add channels") {
    auto fn = weighted(
        [](ad::Tape&, const std::vector<ad::Value>& in) { return ad::bias_add(in[0], in[1]); },
        weights_for({2, 3, 3}, 9));
    auto r = check_gradients(fn, {random_tensor({2, 3, 3}, rng), random_tensor({2}, rng)});
    CHECK_MESSAGE(r.ok, r.detail);
  }
  SUBCASE("leaky_relu") {
    auto fn = weighted(
        [](ad::Tape&, const std::vector<ad::Value>& in) { return ad::leaky_relu(in[0]); },
        weights_for({3, 3}, 10));
    auto r = check_gradients(fn, {random_tensor_away_from_zero({3, 3}, rng)});
    CHECK_MESSAGE(r.ok, r.detail);
  }
  SUBCASE("sigmoid") {
    auto fn = weighted([](ad::Tape&, const std::vector<ad::Value>& in) { return ad::sigmoid(in[0]); },
                       weights_for({7}, 11));
    auto r = check_gradients(fn, {random_tensor({7}, rng, -2.0f, 2.0f)});
    CHECK_MESSAGE(r.ok, r.detail);
  }
  SUBCASE("tanh") {
    auto fn = weighted([](ad::Tape&, const std::vector<ad::Value>& in) { return ad::tanh(in[0]); },
                       weights_for({7}, 12));
    auto r = check_gradients(fn, {random_tensor({7}, rng, -2.0f, 2.0f)});
    CHECK_MESSAGE(r.ok, r.detail);
  }
  SUBCASE("softmax") {
    // negative log-likelihood of one class keeps every gradient component
    // bounded away from zero (dL/dx = y - e0)
    GraphFn fn = [](ad::Tape& t, const std::vector<ad::Value>& in) {
      Tensor pick = Tensor::zeros({5});
      pick.data[0] = 1.0f;
      ad::Value picked = ad::multiply(ad::log(ad::softmax(in[0])), t.constant(pick));
      return ad::scalar_multiply(ad::sum(picked), -1.0f);
    };
    auto r = check_gradients(fn, {random_tensor({5}, rng, -0.5f, 0.5f)});
    CHECK_MESSAGE(r.ok, r.detail);
  }
  SUBCASE("log") {
    auto fn = weighted([](ad::Tape&, const std::vector<ad::Value>& in) { return ad::log(in[0]); },
                       weights_for({6}, 14));
    auto r = check_gradients(fn, {random_tensor({6}, rng, 0.3f, 2.0f)});
    CHECK_MESSAGE(r.ok, r.detail);
  }
  SUBCASE("sum") {
    GraphFn fn = [](ad::Tape&, const std::vector<ad::Value>& in) { return ad::sum(in[0]); };
    auto r = check_gradients(fn, {random_tensor({4, 3}, rng)});
    CHECK_MESSAGE(r.ok, r.detail);
  }
  SUBCASE("mean") {
    GraphFn fn = [](ad::Tape&, const std::vector<ad::Value>& in) { return ad::mean(in[0]); };
    auto r = check_gradients(fn, {random_tensor({9}, rng)});
    CHECK_MESSAGE(r.ok, r.detail);
  }
  SUBCASE("reshape") {
    auto fn = weighted(
        [](ad::Tape&, const std::vector<ad::Value>& in) { return ad::reshape(in[0], {3, 4}); },
        weights_for({3, 4}, 15));
    auto r = check_gradients(fn, {random_tensor({2, 6}, rng)});
    CHECK_MESSAGE(r.ok, r.detail);
  }
  SUBCASE("concat axis 0") {
    auto fn = weighted(
        [](ad::Tape&, const std::vector<ad::Value>& in) {
          std::vector<ad::Value> parts{in[0], in[1]};
          return ad::concat(parts, 0);
        },
        weights_for({4, 3}, 16));
    auto r = check_gradients(fn, {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)});
    CHECK_MESSAGE(r.ok, r.detail);
  }
  SUBCASE("concat axis 1") {
    auto fn = weighted(
        [](ad::Tape&, const std::vector<ad::Value>& in) {
          std::vector<ad::Value> parts{in[0], in[1]};
          return ad::concat(parts, 1);
        },
        weights_for({2, 5}, 17));
    auto r = check_gradients(fn, {random_tensor({2, 3}, rng), random_tensor({2, 2}, rng)});
    CHECK_MESSAGE(r.ok, r.detail);
  }
}

TEST_CASE("gradients match finite differences on composite graphs") {
  // Fixtures are built from cancellation-free monotone chains: positive
  // operands, no saturating activations, pre-activations bounded away from
  // the leaky-relu kink. Gradient components then stay large relative to the
  // float32 finite-difference noise.
  Rng rng(202);

  SUBCASE("conv -> scale -> lrelu -> reshape -> matmul -> bias -> lrelu -> weighted sum") {
    GraphFn fn = [](ad::Tape& t, const std::vector<ad::Value>& in) {
      ad::Value h = ad::conv2d(in[0], in[1], 1);       // (1,3,3), sums of positives
      h = ad::leaky_relu(ad::scalar_multiply(h, 0.3f));
      h = ad::matmul(ad::reshape(h, {3, 3}), in[2]);
      h = ad::leaky_relu(ad::bias_add(h, in[3]));
      return ad::sum(ad::multiply(h, t.constant(weights_for({3, 2}, 31))));
    };
    auto r = check_gradients(fn, {random_tensor({1, 4, 4}, rng, 0.4f, 1.0f),
                                  random_tensor({1, 1, 2, 2}, rng, 0.4f, 1.0f),
                                  random_tensor({3, 2}, rng, 0.4f, 1.0f),
                                  random_tensor({2}, rng, 0.5f, 1.0f)});
    CHECK_MESSAGE(r.ok, r.detail << " worst=" << r.worst_rel_err);
  }
  SUBCASE("softmax nll plus weighted sigmoid branch") {
    GraphFn fn = [](ad::Tape& t, const std::vector<ad::Value>& in) {
      Tensor pick = Tensor::zeros({4});
      pick.data[0] = 1.0f;
      ad::Value nll = ad::scalar_multiply(
          ad::sum(ad::multiply(ad::log(ad::softmax(in[0])), t.constant(pick))), -1.0f);
      ad::Value branch = ad::sum(ad::multiply(ad::sigmoid(in[1]),
                                              t.constant(weights_for({4}, 32, 1.0f, 2.0f))));
      return ad::add(nll, branch);
    };
    auto r = check_gradients(fn, {random_tensor({4}, rng, -0.5f, 0.5f),
                                  random_tensor({4}, rng, -1.0f, 1.0f)});
    CHECK_MESSAGE(r.ok, r.detail << " worst=" << r.worst_rel_err);
  }
  SUBCASE("concat of branches into matmul, log and weighted sum") {
    GraphFn fn = [](ad::Tape& t, const std::vector<ad::Value>& in) {
      std::vector<ad::Value> parts{ad::leaky_relu(in[0]), ad::scalar_multiply(in[1], 0.5f)};
      ad::Value h = ad::concat(parts, 0);      // (4,2), positive entries
      h = ad::log(ad::matmul(h, in[2]));       // (4,3), args in (0.05, 2)
      return ad::sum(ad::multiply(h, t.constant(weights_for({4, 3}, 33))));
    };
    auto r = check_gradients(fn, {random_tensor({2, 2}, rng, 0.3f, 1.0f),
                                  random_tensor({2, 2}, rng, 0.3f, 1.0f),
                                  random_tensor({2, 3}, rng, 0.3f, 1.0f)});
    CHECK_MESSAGE(r.ok, r.detail << " worst=" << r.worst_rel_err);
  }
}

TEST_CASE("repeated use of one value accumulates gradient") {
  ad::Tape t;
  ad::Value x = t.leaf(Tensor({2}, {3, 5}), true);
  // concat([x, x]) summed: each element contributes twice
  std::vector<ad::Value> parts{x, x};
  t.backward(ad::sum(ad::concat(parts, 0)));
  CHECK(t.grad(x).data[0] == doctest::Approx(2.0f));
  CHECK(t.grad(x).data[1] == doctest::Approx(2.0f));
}

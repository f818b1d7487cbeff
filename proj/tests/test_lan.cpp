#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "lankit/lan.hpp"
#include "lankit/nn.hpp"
#include "lankit/presets.hpp"
#include "lankit/serialize.hpp"
#include "testutil.hpp"

using lankit::ConfigError;
using lankit::Rng;
using lankit::ShapeError;
using lankit::Tensor;
namespace ad = lankit::ad;
namespace lan = lankit::lan;
namespace nn = lankit::nn;

namespace {

// Tiny 2-class classifier over 8-dim inputs; trained enough to be non-flat.
nn::Checkpoint small_classifier(std::uint64_t seed) {
  nn::NetworkSpec spec;
  spec.input_shape = {8};
  spec.layers = {nn::LayerSpec::fc(12, nn::Activation::LeakyRelu),
                 nn::LayerSpec::fc(2, nn::Activation::Softmax)};
  std::vector<Tensor> inputs;
  std::vector<int> labels;
  Rng rng(seed);
  for (int i = 0; i < 128; ++i) {
    const int label = i % 2;
    Tensor x = Tensor::zeros({8});
    for (std::size_t j = 0; j < 8; ++j) {
      x.data[j] = rng.uniform(0.0f, 0.3f);
    }
    // first half of the components carries the class signal
    for (std::size_t j = 0; j < 4; ++j) {
      x.data[j] += label == 0 ? 0.7f : 0.0f;
    }
    inputs.push_back(std::move(x));
    labels.push_back(label);
  }
  nn::TrainConfig cfg;
  cfg.lr = 0.01f;
  cfg.iterations = 600;
  cfg.seed = seed;
  return nn::train_classifier(spec, inputs, labels, cfg).checkpoint;
}

// Classifier whose output ignores the input entirely (all weights zero).
nn::Checkpoint constant_classifier(const std::vector<int>& input_shape) {
  nn::NetworkSpec spec;
  spec.input_shape = input_shape;
  spec.layers = {nn::LayerSpec::fc(2, nn::Activation::Softmax)};
  auto params = nn::init_parameters(spec, 0);
  for (auto& [name, tensor] : params) {
    for (float& v : tensor.data) v = 0.0f;
  }
  return nn::Checkpoint{spec, std::move(params), 0, 0};
}

}  // namespace

TEST_CASE("noise sources match their definitions") {
  SUBCASE("constant") {
    lan::NoiseSource src = lan::NoiseSource::constant(0.0f);
    Tensor eta = src.sample({1, 28, 28});
    CHECK(eta.shape == std::vector<int>{1, 28, 28});
    for (float v : eta.data) CHECK(v == 0.0f);
    lan::NoiseSource c2 = lan::NoiseSource::constant(0.75f);
    for (float v : c2.sample({4}).data) CHECK(v == 0.75f);
  }
  SUBCASE("bootstrap over a single-element dataset returns that element") {
    std::vector<Tensor> dataset{Tensor({3}, {1.0f, 2.0f, 3.0f})};
    lan::NoiseSource src = lan::NoiseSource::bootstrap(&dataset, 5);
    for (int i = 0; i < 4; ++i) {
      CHECK(src.sample({3}).data == dataset[0].data);
    }
  }
  SUBCASE("bootstrap rejects an empty dataset") {
    std::vector<Tensor> empty;
    CHECK_THROWS_AS(lan::NoiseSource::bootstrap(&empty, 1), ConfigError);
  }
  SUBCASE("uniform draws have the right range and mean") {
    lan::NoiseSource src = lan::NoiseSource::uniform(0.0f, 1.0f, 11);
    double total = 0.0;
    const int draws = 100;
    for (int i = 0; i < draws; ++i) {
      Tensor eta = src.sample({1000});
      for (float v : eta.data) {
        CHECK(v >= 0.0f);
        CHECK(v < 1.0f);
        total += v;
      }
    }
    const double mean = total / (draws * 1000.0);
    CHECK(std::abs(mean - 0.5) < 0.01);  // 1e5 draws
  }
  SUBCASE("identical seeds replay identical streams") {
    lan::NoiseSource a = lan::NoiseSource::uniform(-1.0f, 1.0f, 33);
    lan::NoiseSource b = lan::NoiseSource::uniform(-1.0f, 1.0f, 33);
    CHECK(a.sample({16}).data == b.sample({16}).data);
  }
}

TEST_CASE("corrupt implements the convex blend") {
  Rng rng(7);
  Tensor x = testutil::random_tensor({2, 3}, rng, 0.0f, 1.0f);
  Tensor eta = testutil::random_tensor({2, 3}, rng, 0.0f, 1.0f);

  SUBCASE("all-ones mask returns the noise") {
    CHECK(lan::corrupt(x, Tensor::ones({2, 3}), eta).data == eta.data);
  }
  SUBCASE("all-zeros mask returns the input unchanged") {
    CHECK(lan::corrupt(x, Tensor::zeros({2, 3}), eta).data == x.data);
  }
  SUBCASE("scalar case 0.25 between 2 and 0") {
    Tensor out = lan::corrupt(Tensor({1}, {2.0f}), Tensor({1}, {0.25f}), Tensor({1}, {0.0f}));
    CHECK(out.data[0] == doctest::Approx(1.5f));
  }
  SUBCASE("corrupting x with itself is the identity for any mask") {
    Tensor mask = testutil::random_tensor({2, 3}, rng, 0.0f, 1.0f);
    Tensor out = lan::corrupt(x, mask, x);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
      CHECK(out.data[i] == doctest::Approx(x.data[i]).epsilon(1e-6));
    }
  }
  SUBCASE("linear in eta for a fixed mask") {
    Tensor mask = testutil::random_tensor({2, 3}, rng, 0.0f, 1.0f);
    Tensor eta2 = testutil::random_tensor({2, 3}, rng, 0.0f, 1.0f);
    std::vector<float> summed(6);
    for (int i = 0; i < 6; ++i) summed[static_cast<std::size_t>(i)] = eta.data[static_cast<std::size_t>(i)] + eta2.data[static_cast<std::size_t>(i)];
    Tensor lhs = lan::corrupt(x, mask, Tensor({2, 3}, summed));
    Tensor a = lan::corrupt(x, mask, eta);
    Tensor b = lan::corrupt(x, mask, eta2);
    Tensor zero = lan::corrupt(x, mask, Tensor::zeros({2, 3}));
    for (std::size_t i = 0; i < lhs.data.size(); ++i) {
      CHECK(lhs.data[i] ==
            doctest::Approx(a.data[i] + b.data[i] - zero.data[i]).epsilon(1e-5));
    }
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(lan::corrupt(x, Tensor::ones({3, 2}), eta), ShapeError);
  }
}

TEST_CASE("importance is the mask complement") {
  lan::AttentionMask mask = lan::AttentionMask::from_tensor(Tensor({3}, {1.0f, 0.0f, 0.3f}));
  Tensor imp = lan::importance(mask);
  CHECK(imp.data[0] == doctest::Approx(0.0f));
  CHECK(imp.data[1] == doctest::Approx(1.0f));
  CHECK(imp.data[2] == doctest::Approx(0.7f));
  CHECK_THROWS_AS(lan::AttentionMask::from_tensor(Tensor({1}, {1.5f})), lankit::NumericError);
}

TEST_CASE("lan_loss at the zero mask is the entropy of F(x)") {
  nn::Checkpoint F = small_classifier(3);
  Rng rng(5);
  Tensor x = testutil::random_tensor({8}, rng, 0.0f, 1.0f);
  lan::AttentionMask zero_mask = lan::AttentionMask::from_tensor(Tensor::zeros({8}));
  lan::NoiseSource noise = lan::NoiseSource::uniform(0.0f, 1.0f, 17);

  const float loss = lan::lan_loss(F, x, zero_mask, noise, 5.0f, 3);
  const float h = nn::entropy(nn::forward(F, x));
  CHECK(loss == doctest::Approx(h).epsilon(1e-5));
}

TEST_CASE("lan_loss penalty term is beta times the mask mean") {
  nn::Checkpoint F = constant_classifier({3});
  Tensor x = Tensor({3}, {0.2f, 0.4f, 0.6f});
  lan::AttentionMask mask = lan::AttentionMask::from_tensor(Tensor({3}, {0.0f, 0.5f, 1.0f}));
  lan::NoiseSource noise = lan::NoiseSource::constant(0.0f);

  // F constant in x: corruption term is exactly entropy(F(x)) = ln 2
  const float beta = 4.0f;
  const float loss = lan::lan_loss(F, x, mask, noise, beta, 1);
  CHECK(loss == doctest::Approx(std::log(2.0f) - beta * 0.5f).epsilon(1e-5));
}

TEST_CASE("train_sample_mask on a constant classifier drives the mask to one") {
  nn::Checkpoint F = constant_classifier({6});
  Tensor x = Tensor({6}, {0.1f, 0.9f, 0.3f, 0.5f, 0.7f, 0.2f});
  lan::NoiseSource noise = lan::NoiseSource::uniform(0.0f, 1.0f, 9);

  lan::SampleMaskConfig cfg;
  cfg.beta = 1.0f;
  cfg.lr = 0.05f;
  cfg.iterations = 2000;
  cfg.seed = 4;
  lan::AttentionMask mask = lan::train_sample_mask(F, x, noise, cfg);
  CHECK(lankit::mean_of(mask.values) >= 0.95f);
  for (float v : mask.values.data) {
    CHECK(v > 0.0f);
    CHECK(v < 1.0f);
  }
}

TEST_CASE("train_lan on a constant classifier drives masks to one") {
  nn::Checkpoint F = constant_classifier({6});
  Rng rng(2);
  std::vector<Tensor> dataset;
  for (int i = 0; i < 32; ++i) {
    dataset.push_back(testutil::random_tensor({6}, rng, 0.0f, 1.0f));
  }
  lan::NoiseSource noise = lan::NoiseSource::bootstrap(&dataset, 12);

  lan::LanTrainConfig cfg;
  cfg.beta = 1.0f;
  cfg.lr = 0.01f;
  cfg.iterations = 1500;
  cfg.seed = 8;
  cfg.batch_size = 8;
  cfg.lan_arch.input_shape = {6};
  cfg.lan_arch.layers = {nn::LayerSpec::fc(10, nn::Activation::LeakyRelu),
                         nn::LayerSpec::fc(6, nn::Activation::Sigmoid)};

  nn::Checkpoint lan_net = lan::train_lan(F, dataset, noise, cfg);
  double mean_mask = 0.0;
  for (const Tensor& x : dataset) {
    mean_mask += lankit::mean_of(lan::lan_mask(lan_net, x).values);
  }
  CHECK(mean_mask / dataset.size() >= 0.95);
}

TEST_CASE("train_lan leaves the classifier parameters bit-identical") {
  nn::Checkpoint F = small_classifier(11);
  const nn::ParamList before = F.params;

  Rng rng(6);
  std::vector<Tensor> dataset;
  for (int i = 0; i < 16; ++i) dataset.push_back(testutil::random_tensor({8}, rng, 0.0f, 1.0f));
  lan::NoiseSource noise = lan::NoiseSource::bootstrap(&dataset, 3);

  lan::LanTrainConfig cfg;
  cfg.beta = 2.0f;
  cfg.lr = 0.01f;
  cfg.iterations = 50;
  cfg.seed = 1;
  cfg.batch_size = 4;
  cfg.lan_arch.input_shape = {8};
  cfg.lan_arch.layers = {nn::LayerSpec::fc(8, nn::Activation::LeakyRelu),
                         nn::LayerSpec::fc(8, nn::Activation::Sigmoid)};
  lan::train_lan(F, dataset, noise, cfg);

  REQUIRE(F.params.size() == before.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(F.params[i].second.data == before[i].second.data);
  }
}

TEST_CASE("zero iterations return the LAN initialization / the 0.5 mask") {
  nn::Checkpoint F = small_classifier(13);
  Rng rng(1);
  Tensor x = testutil::random_tensor({8}, rng, 0.0f, 1.0f);
  lan::NoiseSource noise = lan::NoiseSource::constant(0.0f);

  lan::SampleMaskConfig cfg;
  cfg.iterations = 0;
  lan::AttentionMask mask = lan::train_sample_mask(F, x, noise, cfg);
  for (float v : mask.values.data) CHECK(v == doctest::Approx(0.5f));

  std::vector<Tensor> dataset{x};
  lan::LanTrainConfig lcfg;
  lcfg.iterations = 0;
  lcfg.seed = 21;
  lcfg.lan_arch.input_shape = {8};
  lcfg.lan_arch.layers = {nn::LayerSpec::fc(8, nn::Activation::Sigmoid)};
  nn::Checkpoint lan_net = lan::train_lan(F, dataset, noise, lcfg);
  auto init = nn::init_parameters(lcfg.lan_arch, lankit::split_seed(21, 0));
  for (std::size_t i = 0; i < init.size(); ++i) {
    CHECK(lan_net.params[i].second.data == init[i].second.data);
  }
}

TEST_CASE("lan training is deterministic in the seed") {
  nn::Checkpoint F = small_classifier(17);
  Rng rng(14);
  Tensor x = testutil::random_tensor({8}, rng, 0.0f, 1.0f);

  lan::SampleMaskConfig cfg;
  cfg.beta = 2.0f;
  cfg.lr = 0.05f;
  cfg.iterations = 300;
  auto run = [&]() {
    lan::NoiseSource noise = lan::NoiseSource::uniform(0.0f, 1.0f, 42);
    return lan::train_sample_mask(F, x, noise, cfg);
  };
  CHECK(run().values.data == run().values.data);
}

TEST_CASE("larger beta corrupts more at the optimum") {
  nn::Checkpoint F = small_classifier(19);
  lan::SampleMaskConfig lo_cfg;
  lo_cfg.beta = 0.5f;
  lo_cfg.lr = 0.05f;
  lo_cfg.iterations = 1200;
  lan::SampleMaskConfig hi_cfg = lo_cfg;
  hi_cfg.beta = 50.0f;

  Rng rng(25);
  int wins = 0;
  const int samples = 10;
  for (int i = 0; i < samples; ++i) {
    Tensor x = testutil::random_tensor({8}, rng, 0.0f, 1.0f);
    lan::NoiseSource lo_noise = lan::NoiseSource::uniform(0.0f, 1.0f, 100 + i);
    lan::NoiseSource hi_noise = lan::NoiseSource::uniform(0.0f, 1.0f, 100 + i);
    const float lo = lankit::mean_of(lan::train_sample_mask(F, x, lo_noise, lo_cfg).values);
    const float hi = lankit::mean_of(lan::train_sample_mask(F, x, hi_noise, hi_cfg).values);
    if (hi > lo) ++wins;
  }
  CHECK(wins >= 9);
}

TEST_CASE("masks round-trip exactly through the mask container") {
  Rng rng(31);
  Tensor values = testutil::random_tensor({1, 7, 7}, rng, 0.0f, 1.0f);
  lan::AttentionMask mask = lan::AttentionMask::from_tensor(values);

  testutil::TempDir dir("mask");
  const auto path = dir.path() / "sample.mask";
  lankit::save_mask(path, mask);
  lan::AttentionMask loaded = lankit::load_mask(path);
  CHECK(loaded.values.shape == mask.values.shape);
  CHECK(loaded.values.data == mask.values.data);

  lankit::write_file_atomic(path, "LANWRONG....");
  CHECK_THROWS_AS(lankit::load_mask(path), lankit::FormatError);
}

TEST_CASE("multi-channel masks tile across channels") {
  ad::Tape tape;
  Tensor single = Tensor({1, 2, 2}, {0.1f, 0.2f, 0.3f, 0.4f});
  ad::Value tiled = lan::expand_mask(tape, tape.constant(single), {3, 2, 2});
  const Tensor& out = tape.value(tiled);
  REQUIRE(out.shape == std::vector<int>{3, 2, 2});
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < 4; ++i) {
      CHECK(out.data[static_cast<std::size_t>(c * 4 + i)] ==
            single.data[static_cast<std::size_t>(i)]);
    }
  }
  CHECK(lan::mask_shape_for({3, 32, 32}) == std::vector<int>{1, 32, 32});
  CHECK(lan::mask_shape_for({1, 28, 28}) == std::vector<int>{1, 28, 28});
  CHECK(lan::mask_shape_for({500}) == std::vector<int>{500});
}

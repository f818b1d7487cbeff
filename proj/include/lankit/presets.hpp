#pragma once

#include <string>
#include <vector>

#include "lankit/lan.hpp"
#include "lankit/nn.hpp"

namespace lankit::presets {

// --- network architectures -------------------------------------------------

// Conv(10,2,4x4,lrelu) / Conv(20,2,4x4,lrelu) / FC(10,softmax) on 28x28.
nn::NetworkSpec digit_classifier();
// Small conv net for the 32x32 tank scenes, 2 classes.
nn::NetworkSpec tank_classifier();
// Averaging-style bag-of-words classifier: 50-dim linear embedding, two
// hidden layers with dropout, softmax head.
nn::NetworkSpec document_classifier(int vocab_size, int classes, float keep_prob = 0.5f);

// FC(100,lrelu) / FC(784,sigmoid) mask network over 28x28 inputs.
nn::NetworkSpec digit_lan();
// FC(hidden,lrelu) / FC(h*w,sigmoid) over a (c,h,w) input.
nn::NetworkSpec image_lan(const std::vector<int>& input_shape, int hidden = 100);
// FC(100,lrelu) / FC(1000,lrelu) / FC(vocab,sigmoid).
nn::NetworkSpec document_lan(int vocab_size);

// --- hyperparameter bundles --------------------------------------------------

struct TrainPreset {
  std::string name;
  float lr = 0.001f;
  std::int64_t iterations = 0;
  int batch_size = 32;
};

enum class NoiseKind { Constant, Bootstrap, Uniform };

struct NoisePreset {
  NoiseKind kind = NoiseKind::Bootstrap;
  float constant_value = 0.0f;
  float lo = 0.0f, hi = 1.0f;
};

struct LanPreset {
  std::string name;
  float beta = 1.0f;
  float lr = 0.0001f;
  std::int64_t iterations = 0;
  int noise_samples = 1;
  int batch_size = 32;
  NoisePreset noise;
};

// Classifier presets: digits / digits-full, tanks, documents / documents-full.
// The -full variants carry the long original schedules; the defaults are
// desk-scale with the same architectures and learning rates.
TrainPreset classifier_preset(const std::string& name);

// LAN presets: digits / digits-full (beta 5, bootstrap), documents /
// documents-full (beta 50, constant 0). Sample-mask presets:
// sample-images (lr 0.05), sample-documents (lr 0.001), both 10k iterations
// at beta 50; tanks (beta 1, bootstrap, lr 0.05, 10k iterations).
LanPreset lan_preset(const std::string& name);
std::vector<std::string> classifier_preset_names();
std::vector<std::string> lan_preset_names();

}  // namespace lankit::presets

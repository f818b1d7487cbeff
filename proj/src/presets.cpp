#include "lankit/presets.hpp"

namespace lankit::presets {

using nn::Activation;
using nn::LayerSpec;
using nn::NetworkSpec;

NetworkSpec digit_classifier() {
  NetworkSpec spec;
  spec.input_shape = {1, 28, 28};
  spec.layers = {
      LayerSpec::conv(10, 2, 4, 4, Activation::LeakyRelu),
      LayerSpec::conv(20, 2, 4, 4, Activation::LeakyRelu),
      LayerSpec::fc(10, Activation::Softmax),
  };
  return spec;
}

NetworkSpec tank_classifier() {
  NetworkSpec spec;
  spec.input_shape = {1, 32, 32};
  spec.layers = {
      LayerSpec::conv(8, 2, 4, 4, Activation::LeakyRelu),
      LayerSpec::conv(16, 2, 4, 4, Activation::LeakyRelu),
      LayerSpec::fc(2, Activation::Softmax),
  };
  return spec;
}

NetworkSpec document_classifier(int vocab_size, int classes, float keep_prob) {
  NetworkSpec spec;
  spec.input_shape = {vocab_size};
  spec.layers = {
      LayerSpec::fc(50, Activation::Identity),
      LayerSpec::fc(200, Activation::LeakyRelu),
      LayerSpec::dropout(keep_prob),
      LayerSpec::fc(150, Activation::LeakyRelu),
      LayerSpec::dropout(keep_prob),
      LayerSpec::fc(classes, Activation::Softmax),
  };
  return spec;
}

NetworkSpec digit_lan() { return image_lan({1, 28, 28}, 100); }

NetworkSpec image_lan(const std::vector<int>& input_shape, int hidden) {
  if (input_shape.size() != 3) {
    throw ConfigError("image_lan: input shape must be (c,h,w), got " + shape_str(input_shape));
  }
  NetworkSpec spec;
  spec.input_shape = input_shape;
  spec.layers = {
      LayerSpec::fc(hidden, Activation::LeakyRelu),
      LayerSpec::fc(input_shape[1] * input_shape[2], Activation::Sigmoid),
  };
  return spec;
}

NetworkSpec document_lan(int vocab_size) {
  NetworkSpec spec;
  spec.input_shape = {vocab_size};
  spec.layers = {
      LayerSpec::fc(100, Activation::LeakyRelu),
      LayerSpec::fc(1000, Activation::LeakyRelu),
      LayerSpec::fc(vocab_size, Activation::Sigmoid),
  };
  return spec;
}

TrainPreset classifier_preset(const std::string& name) {
  if (name == "digits") return {name, 0.001f, 15000, 32};
  if (name == "digits-full") return {name, 0.001f, 100000, 32};
  if (name == "tanks") return {name, 0.001f, 4000, 32};
  if (name == "documents") return {name, 0.001f, 3000, 32};
  if (name == "documents-full") return {name, 0.00005f, 1000000, 32};
  throw ConfigError("unknown classifier preset '" + name + "'; valid: digits, digits-full, " +
                    "tanks, documents, documents-full");
}

LanPreset lan_preset(const std::string& name) {
  LanPreset p;
  p.name = name;
  if (name == "digits") {
    p.beta = 5.0f;
    p.lr = 0.0001f;
    p.iterations = 20000;
    p.noise.kind = NoiseKind::Bootstrap;
    return p;
  }
  if (name == "digits-full") {
    p.beta = 5.0f;
    p.lr = 0.0001f;
    p.iterations = 100000;
    p.noise.kind = NoiseKind::Bootstrap;
    return p;
  }
  if (name == "documents") {
    p.beta = 50.0f;
    p.lr = 0.001f;
    p.iterations = 5000;
    p.noise.kind = NoiseKind::Constant;
    p.noise.constant_value = 0.0f;
    return p;
  }
  if (name == "documents-full") {
    p.beta = 50.0f;
    p.lr = 0.001f;
    p.iterations = 100000;
    p.noise.kind = NoiseKind::Constant;
    p.noise.constant_value = 0.0f;
    return p;
  }
  if (name == "sample-images") {
    p.beta = 50.0f;
    p.lr = 0.05f;
    p.iterations = 10000;
    p.noise.kind = NoiseKind::Bootstrap;
    return p;
  }
  if (name == "sample-documents") {
    p.beta = 50.0f;
    p.lr = 0.001f;
    p.iterations = 10000;
    p.noise.kind = NoiseKind::Constant;
    p.noise.constant_value = 0.0f;
    return p;
  }
  if (name == "tanks") {
    p.beta = 1.0f;
    p.lr = 0.05f;
    p.iterations = 10000;
    p.noise.kind = NoiseKind::Bootstrap;
    return p;
  }
  throw ConfigError("unknown LAN preset '" + name + "'; valid: digits, digits-full, documents, " +
                    "documents-full, sample-images, sample-documents, tanks");
}

std::vector<std::string> classifier_preset_names() {
  return {"digits", "digits-full", "tanks", "documents", "documents-full"};
}

std::vector<std::string> lan_preset_names() {
  return {"digits", "digits-full", "documents", "documents-full",
          "sample-images", "sample-documents", "tanks"};
}

}  // namespace lankit::presets

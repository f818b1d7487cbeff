#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lankit/data.hpp"
#include "lankit/lan.hpp"
#include "lankit/nn.hpp"
#include "lankit/tensor.hpp"

namespace lankit::diag {

// Elementwise mean of importance(A(x)) over the dataset; shape is the LAN's
// mask shape (single-channel for images).
Tensor mean_importance(const nn::Checkpoint& lan, const std::vector<Tensor>& inputs);

struct Heatmap {
  Tensor raw;                  // (28,28) exact accuracy ratios; 0 where undefined
  Tensor normalized;           // min-max over defined cells; undefined cells 0
  std::vector<std::uint8_t> defined;  // (28,28) flags
  float min_raw = 0.0f;
  float max_raw = 0.0f;

  bool is_defined(int x, int y) const { return defined[static_cast<std::size_t>(y) * 28 + x] != 0; }
};

struct HeatmapConfig {
  int digit_size = 12;
  int trials = 50;
  std::uint64_t seed = 0;
  int jobs = 1;
};

// Classification accuracy for digits forced to each possible center position.
// Each defined cell is the exact ratio correct/trials over freshly drawn
// source digits placed with that center.
Heatmap accuracy_heatmap(const nn::Checkpoint& classifier,
                         const std::vector<data::ImageSample>& digit_sources,
                         const HeatmapConfig& cfg);

// Mean raw accuracy over defined centers inside/outside a region.
struct RegionAccuracy {
  float inside = 0.0f;
  float outside = 0.0f;
  int inside_cells = 0;
  int outside_cells = 0;
};
RegionAccuracy split_heatmap(const Heatmap& hm, const data::Box& region);

struct WordRanking {
  std::vector<std::pair<std::string, float>> entries;  // descending importance
};

// k tokens with the highest importance; ties broken by vocabulary index.
WordRanking top_k_words(const Tensor& importance, const data::Vocabulary& vocab, int k);

struct RegionStats {
  struct Entry {
    std::string name;
    float mean_importance = 0.0f;
    float max_importance = 0.0f;
    std::int64_t pixels = 0;
  };
  std::vector<Entry> regions;  // named boxes plus "background"

  const Entry& at(const std::string& name) const;
};

// Importance statistics per labeled box of the sample, and over the
// remaining background pixels.
RegionStats region_stats(const lan::AttentionMask& mask, const data::ImageSample& sample);

struct BetaSweepRecord {
  float beta = 0.0f;
  float mean_mask = 0.0f;
  float final_loss = 0.0f;
  lan::AttentionMask mask;
};

// train_sample_mask once per beta with identical seeds; records aligned with
// the input order.
std::vector<BetaSweepRecord> beta_sweep(const nn::Checkpoint& classifier, const Tensor& x,
                                        const lan::NoiseSource& noise_template,
                                        const std::vector<float>& betas,
                                        const lan::SampleMaskConfig& base_cfg);

struct GridScore {
  int lag_x = 0;
  int lag_y = 0;
  float ratio = 0.0f;  // secondary peak magnitude relative to the zero-lag peak
  Tensor autocorr;     // (2*max_lag+1, 2*max_lag+1), lag (0,0) at the center
};

// Spatial autocorrelation of a mean-centered map; the score is the strongest
// local maximum away from zero lag. Periodic structure shows up as a
// secondary peak at the period.
GridScore grid_score(const Tensor& map, int max_lag = 10);

}  // namespace lankit::diag

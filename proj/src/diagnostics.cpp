#include "lankit/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace lankit::diag {

Tensor mean_importance(const nn::Checkpoint& lan, const std::vector<Tensor>& inputs) {
  if (inputs.empty()) throw ConfigError("mean_importance: empty dataset");
  Tensor acc;
  for (const Tensor& x : inputs) {
    Tensor imp = lan::importance(lan::lan_mask(lan, x));
    if (acc.data.empty()) {
      acc = std::move(imp);
    } else {
      require_same_shape(acc, imp, "mean_importance");
      for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += imp.data[i];
    }
  }
  const float inv = 1.0f / static_cast<float>(inputs.size());
  for (float& v : acc.data) v *= inv;
  return acc;
}

Heatmap accuracy_heatmap(const nn::Checkpoint& classifier,
                         const std::vector<data::ImageSample>& digit_sources,
                         const HeatmapConfig& cfg) {
  if (digit_sources.empty()) throw ConfigError("accuracy_heatmap: no digit sources");
  if (cfg.trials < 1) throw ConfigError("accuracy_heatmap: trials must be >= 1");
  const int s = cfg.digit_size;
  const int half = s / 2;
  const int offsets = 28 - s + 1;

  struct Cell {
    int cx, cy, x0, y0;
  };
  std::vector<Cell> cells;
  for (int y0 = 0; y0 < offsets; ++y0) {
    for (int x0 = 0; x0 < offsets; ++x0) {
      cells.push_back({x0 + half, y0 + half, x0, y0});
    }
  }

  std::vector<float> acc(cells.size(), 0.0f);
  auto run_cell = [&](std::size_t ci) {
    const Cell& c = cells[ci];
    Rng rng(split_seed(cfg.seed, static_cast<std::uint64_t>(c.cy) * 28 + c.cx));
    int correct = 0;
    for (int t = 0; t < cfg.trials; ++t) {
      const data::ImageSample& src = digit_sources[rng.index(digit_sources.size())];
      Tensor img = data::place_digit(data::downscale_digit(src.pixels, s), c.x0, c.y0);
      if (nn::predict(classifier, img) == src.label) ++correct;
    }
    acc[ci] = static_cast<float>(correct) / static_cast<float>(cfg.trials);
  };

  const int jobs = std::max(1, cfg.jobs);
  if (jobs == 1) {
    for (std::size_t ci = 0; ci < cells.size(); ++ci) run_cell(ci);
  } else {
    std::vector<std::thread> workers;
    for (int j = 0; j < jobs; ++j) {
      workers.emplace_back([&, j] {
        for (std::size_t ci = static_cast<std::size_t>(j); ci < cells.size();
             ci += static_cast<std::size_t>(jobs)) {
          run_cell(ci);
        }
      });
    }
    for (auto& w : workers) w.join();
  }

  Heatmap hm;
  hm.raw = Tensor::zeros({28, 28});
  hm.normalized = Tensor::zeros({28, 28});
  hm.defined.assign(28 * 28, 0);
  float mn = 1.0f, mx = 0.0f;
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    const Cell& c = cells[ci];
    const std::size_t at = static_cast<std::size_t>(c.cy) * 28 + c.cx;
    hm.raw.data[at] = acc[ci];
    hm.defined[at] = 1;
    mn = std::min(mn, acc[ci]);
    mx = std::max(mx, acc[ci]);
  }
  hm.min_raw = mn;
  hm.max_raw = mx;
  for (std::size_t i = 0; i < hm.defined.size(); ++i) {
    if (!hm.defined[i]) continue;
    hm.normalized.data[i] = (mx > mn) ? (hm.raw.data[i] - mn) / (mx - mn) : 1.0f;
  }
  return hm;
}

RegionAccuracy split_heatmap(const Heatmap& hm, const data::Box& region) {
  RegionAccuracy out;
  double in_acc = 0.0, out_acc = 0.0;
  for (int y = 0; y < 28; ++y) {
    for (int x = 0; x < 28; ++x) {
      if (!hm.is_defined(x, y)) continue;
      const float v = hm.raw.data[static_cast<std::size_t>(y) * 28 + x];
      if (region.contains(x, y)) {
        in_acc += v;
        ++out.inside_cells;
      } else {
        out_acc += v;
        ++out.outside_cells;
      }
    }
  }
  if (out.inside_cells > 0) out.inside = static_cast<float>(in_acc / out.inside_cells);
  if (out.outside_cells > 0) out.outside = static_cast<float>(out_acc / out.outside_cells);
  return out;
}

WordRanking top_k_words(const Tensor& importance, const data::Vocabulary& vocab, int k) {
  if (importance.numel() != vocab.size()) {
    throw ShapeError("top_k_words: importance length " + std::to_string(importance.numel()) +
                     " does not match vocabulary size " + std::to_string(vocab.size()));
  }
  if (k < 0 || k > vocab.size()) {
    throw ConfigError("top_k_words: k " + std::to_string(k) + " outside [0, vocab size]");
  }
  std::vector<int> idx(static_cast<std::size_t>(vocab.size()));
  for (int i = 0; i < vocab.size(); ++i) idx[static_cast<std::size_t>(i)] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    const float va = importance.data[static_cast<std::size_t>(a)];
    const float vb = importance.data[static_cast<std::size_t>(b)];
    if (va != vb) return va > vb;
    return a < b;
  });
  WordRanking r;
  r.entries.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const int token_id = idx[static_cast<std::size_t>(i)];
    r.entries.emplace_back(vocab.tokens[static_cast<std::size_t>(token_id)],
                           importance.data[static_cast<std::size_t>(token_id)]);
  }
  return r;
}

const RegionStats::Entry& RegionStats::at(const std::string& name) const {
  for (const Entry& e : regions) {
    if (e.name == name) return e;
  }
  throw ConfigError("no region named '" + name + "' in report");
}

RegionStats region_stats(const lan::AttentionMask& mask, const data::ImageSample& sample) {
  if (sample.boxes.empty()) {
    throw ConfigError("region_stats: sample carries no labeled boxes");
  }
  const Tensor imp = lan::importance(mask);
  if (imp.rank() != 3) {
    throw ShapeError("region_stats: expected a (c,h,w) mask, got " + shape_str(imp.shape));
  }
  const int h = imp.shape[1], w = imp.shape[2];
  if (sample.pixels.shape[1] != h || sample.pixels.shape[2] != w) {
    throw ShapeError("region_stats: mask " + shape_str(imp.shape) + " does not cover sample " +
                     shape_str(sample.pixels.shape));
  }
  // channel 0; multi-channel masks are channel-tiled by construction
  auto imp_at = [&](int x, int y) { return imp.data[static_cast<std::size_t>(y) * w + x]; };

  RegionStats stats;
  for (const auto& [name, box] : sample.boxes) {
    if (box.width() <= 0 || box.height() <= 0 || box.x0 < 0 || box.y0 < 0 || box.x1 > w ||
        box.y1 > h) {
      throw ShapeError("region_stats: box '" + name + "' outside image bounds");
    }
    RegionStats::Entry e;
    e.name = name;
    double acc = 0.0;
    for (int y = box.y0; y < box.y1; ++y) {
      for (int x = box.x0; x < box.x1; ++x) {
        const float v = imp_at(x, y);
        acc += v;
        e.max_importance = std::max(e.max_importance, v);
        ++e.pixels;
      }
    }
    e.mean_importance = static_cast<float>(acc / static_cast<double>(e.pixels));
    stats.regions.push_back(std::move(e));
  }

  RegionStats::Entry bg;
  bg.name = "background";
  double acc = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool in_box = false;
      for (const auto& [name, box] : sample.boxes) {
        if (box.contains(x, y)) {
          in_box = true;
          break;
        }
      }
      if (in_box) continue;
      const float v = imp_at(x, y);
      acc += v;
      bg.max_importance = std::max(bg.max_importance, v);
      ++bg.pixels;
    }
  }
  if (bg.pixels > 0) {
    bg.mean_importance = static_cast<float>(acc / static_cast<double>(bg.pixels));
    stats.regions.push_back(std::move(bg));
  }
  return stats;
}

std::vector<BetaSweepRecord> beta_sweep(const nn::Checkpoint& classifier, const Tensor& x,
                                        const lan::NoiseSource& noise_template,
                                        const std::vector<float>& betas,
                                        const lan::SampleMaskConfig& base_cfg) {
  if (betas.empty()) throw ConfigError("beta_sweep: no beta values");
  for (float b : betas) {
    if (!(b > 0.0f)) throw ConfigError("beta_sweep: beta values must be positive");
  }
  std::vector<BetaSweepRecord> records;
  records.reserve(betas.size());
  for (float beta : betas) {
    lan::SampleMaskConfig cfg = base_cfg;
    cfg.beta = beta;
    lan::NoiseSource train_noise = noise_template;  // every beta replays the same draws
    BetaSweepRecord rec;
    rec.beta = beta;
    rec.mask = lan::train_sample_mask(classifier, x, train_noise, cfg);
    rec.mean_mask = mean_of(rec.mask.values);
    lan::NoiseSource eval_noise = noise_template;
    rec.final_loss = lan::lan_loss(classifier, x, rec.mask, eval_noise, beta, cfg.noise_samples);
    records.push_back(std::move(rec));
  }
  return records;
}

GridScore grid_score(const Tensor& map, int max_lag) {
  if (map.numel() < 4) throw ShapeError("grid_score: map too small");
  Tensor flat = map;
  if (flat.rank() == 3 && flat.shape[0] == 1) flat.shape = {flat.shape[1], flat.shape[2]};
  if (flat.rank() != 2) {
    throw ShapeError("grid_score: expected a 2-d map, got " + shape_str(map.shape));
  }
  const int h = flat.shape[0], w = flat.shape[1];
  max_lag = std::min({max_lag, h - 1, w - 1});

  const float mu = mean_of(flat);
  std::vector<float> z(flat.data.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = flat.data[i] - mu;

  const int span = 2 * max_lag + 1;
  Tensor corr = Tensor::zeros({span, span});
  auto corr_at = [&](int dy, int dx) -> float& {
    return corr.data[static_cast<std::size_t>(dy + max_lag) * span + (dx + max_lag)];
  };
  for (int dy = -max_lag; dy <= max_lag; ++dy) {
    for (int dx = -max_lag; dx <= max_lag; ++dx) {
      double acc = 0.0;
      const int y_lo = std::max(0, -dy), y_hi = std::min(h, h - dy);
      const int x_lo = std::max(0, -dx), x_hi = std::min(w, w - dx);
      for (int y = y_lo; y < y_hi; ++y) {
        for (int x = x_lo; x < x_hi; ++x) {
          acc += static_cast<double>(z[static_cast<std::size_t>(y) * w + x]) *
                 z[static_cast<std::size_t>(y + dy) * w + (x + dx)];
        }
      }
      corr_at(dy, dx) = static_cast<float>(acc);
    }
  }

  const float zero_peak = corr_at(0, 0);
  GridScore score;
  score.autocorr = corr;
  if (zero_peak <= 0.0f) return score;  // constant map: no structure

  // Strongest strict local maximum (8-neighborhood) away from zero lag.
  for (int dy = -max_lag; dy <= max_lag; ++dy) {
    for (int dx = -max_lag; dx <= max_lag; ++dx) {
      if (dy == 0 && dx == 0) continue;
      const float v = corr_at(dy, dx);
      bool is_peak = true;
      for (int ny = -1; ny <= 1 && is_peak; ++ny) {
        for (int nx = -1; nx <= 1; ++nx) {
          if (ny == 0 && nx == 0) continue;
          const int py = dy + ny, px = dx + nx;
          if (py < -max_lag || py > max_lag || px < -max_lag || px > max_lag) continue;
          if (corr_at(py, px) > v) {
            is_peak = false;
            break;
          }
        }
      }
      if (is_peak && v / zero_peak > score.ratio) {
        score.ratio = v / zero_peak;
        score.lag_y = dy;
        score.lag_x = dx;
      }
    }
  }
  return score;
}

}  // namespace lankit::diag

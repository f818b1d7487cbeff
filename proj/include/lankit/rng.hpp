#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace lankit {

// splitmix64 mix of (seed, stream). Parallel jobs and sub-tasks derive their
// own streams from one run seed so results stay reproducible regardless of
// scheduling.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// mt19937_64 core with fixed draw algorithms. std::uniform_*_distribution is
// implementation-defined, so all draws are derived from raw bits here and
// identical seeds give identical streams on any toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t bits() { return gen_(); }

  // [0,1)
  float uniform() { return static_cast<float>((gen_() >> 11) * 0x1.0p-53); }

  float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

  // [0,n)
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(gen_()) * static_cast<unsigned __int128>(n)) >> 64);
  }

  // inclusive range
  int range_int(int lo, int hi) { return lo + static_cast<int>(index(static_cast<std::size_t>(hi - lo) + 1)); }

  bool bernoulli(float p) { return uniform() < p; }

  float normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // Box-Muller
    float u1 = uniform();
    float u2 = uniform();
    if (u1 < 1e-12f) u1 = 1e-12f;
    float r = std::sqrt(-2.0f * std::log(u1));
    spare_ = r * std::sin(6.28318530717958647692f * u2);
    has_spare_ = true;
    return r * std::cos(6.28318530717958647692f * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

 private:
  std::mt19937_64 gen_;
  float spare_ = 0.0f;
  bool has_spare_ = false;
};

}  // namespace lankit

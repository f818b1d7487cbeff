#include <algorithm>
#include <cmath>
#include <vector>

#include "lankit/data.hpp"

namespace lankit::data {

namespace {

struct Pt {
  float x, y;
};

using Stroke = std::vector<Pt>;

Stroke arc(float cx, float cy, float rx, float ry, float deg0, float deg1, int segments = 10) {
  Stroke s;
  const float d2r = 3.14159265358979323846f / 180.0f;
  for (int i = 0; i <= segments; ++i) {
    const float a = (deg0 + (deg1 - deg0) * static_cast<float>(i) / segments) * d2r;
    s.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  return s;
}

// Glyphs in unit coordinates, y pointing down. Angle convention follows
// y-down too: 270 degrees is the top of an arc, 90 the bottom.
std::vector<Stroke> digit_strokes(int digit) {
  switch (digit) {
    case 0:
      return {arc(0.50f, 0.50f, 0.28f, 0.40f, 0.0f, 360.0f, 16)};
    case 1:
      return {{{0.32f, 0.28f}, {0.55f, 0.10f}, {0.55f, 0.90f}}};
    case 2:
      return {arc(0.48f, 0.30f, 0.28f, 0.21f, 180.0f, 360.0f),
              {{0.76f, 0.30f}, {0.70f, 0.52f}, {0.22f, 0.90f}, {0.80f, 0.90f}}};
    case 3:
      return {arc(0.45f, 0.30f, 0.28f, 0.20f, 200.0f, 450.0f),
              arc(0.45f, 0.70f, 0.28f, 0.20f, 270.0f, 520.0f)};
    case 4:
      return {{{0.68f, 0.90f}, {0.68f, 0.10f}, {0.18f, 0.62f}, {0.85f, 0.62f}}};
    case 5:
      return {{{0.78f, 0.10f}, {0.25f, 0.10f}, {0.22f, 0.45f}, {0.50f, 0.42f}},
              arc(0.50f, 0.65f, 0.28f, 0.23f, 270.0f, 510.0f)};
    case 6:
      return {{{0.70f, 0.12f}, {0.42f, 0.25f}, {0.29f, 0.50f}, {0.29f, 0.70f}},
              arc(0.48f, 0.70f, 0.20f, 0.18f, 0.0f, 360.0f, 12)};
    case 7:
      return {{{0.18f, 0.12f}, {0.80f, 0.12f}, {0.45f, 0.90f}},
              {{0.35f, 0.50f}, {0.64f, 0.50f}}};
    case 8:
      return {arc(0.50f, 0.30f, 0.22f, 0.18f, 0.0f, 360.0f, 12),
              arc(0.50f, 0.70f, 0.27f, 0.20f, 0.0f, 360.0f, 12)};
    case 9:
      return {arc(0.52f, 0.32f, 0.21f, 0.19f, 0.0f, 360.0f, 12),
              {{0.73f, 0.32f}, {0.70f, 0.60f}, {0.55f, 0.90f}}};
    default:
      throw ConfigError("digit must be in 0..9, got " + std::to_string(digit));
  }
}

float dist_to_segment(float px, float py, Pt a, Pt b) {
  const float dx = b.x - a.x, dy = b.y - a.y;
  const float len2 = dx * dx + dy * dy;
  float t = 0.0f;
  if (len2 > 0.0f) {
    t = std::clamp(((px - a.x) * dx + (py - a.y) * dy) / len2, 0.0f, 1.0f);
  }
  const float ex = a.x + t * dx - px;
  const float ey = a.y + t * dy - py;
  return std::sqrt(ex * ex + ey * ey);
}

}  // namespace

Tensor render_digit(int digit, Rng& rng) {
  const std::vector<Stroke> strokes = digit_strokes(digit);

  // Per-sample jitter: rotation, anisotropic scale, translation, vertex noise.
  const float rot = rng.uniform(-0.12f, 0.12f);
  const float sx = rng.uniform(0.85f, 1.05f);
  const float sy = rng.uniform(0.85f, 1.05f);
  const float tx = rng.uniform(-1.5f, 1.5f);
  const float ty = rng.uniform(-1.5f, 1.5f);
  const float thickness = rng.uniform(0.6f, 1.1f);
  const float intensity = rng.uniform(0.7f, 1.0f);
  const float cosr = std::cos(rot), sinr = std::sin(rot);

  std::vector<Stroke> placed;
  for (const Stroke& s : strokes) {
    Stroke out;
    out.reserve(s.size());
    for (const Pt& p : s) {
      // unit box -> 20x20 region at offset 4, jittered about the canvas center
      float x = 4.0f + 20.0f * p.x - 14.0f;
      float y = 4.0f + 20.0f * p.y - 14.0f;
      x *= sx;
      y *= sy;
      const float xr = x * cosr - y * sinr + 14.0f + tx + rng.uniform(-0.5f, 0.5f);
      const float yr = x * sinr + y * cosr + 14.0f + ty + rng.uniform(-0.5f, 0.5f);
      out.push_back({xr, yr});
    }
    placed.push_back(std::move(out));
  }

  Tensor img = Tensor::zeros({1, 28, 28});
  const float aa = 0.8f;  // linear falloff width in pixels
  for (int y = 0; y < 28; ++y) {
    for (int x = 0; x < 28; ++x) {
      const float px = static_cast<float>(x) + 0.5f;
      const float py = static_cast<float>(y) + 0.5f;
      float best = 1e9f;
      for (const Stroke& s : placed) {
        for (std::size_t i = 0; i + 1 < s.size(); ++i) {
          best = std::min(best, dist_to_segment(px, py, s[i], s[i + 1]));
        }
      }
      const float cov = std::clamp((thickness + aa - best) / aa, 0.0f, 1.0f);
      img.data[static_cast<std::size_t>(y) * 28 + x] = std::clamp(intensity * cov, 0.0f, 1.0f);
    }
  }
  return img;
}

std::vector<ImageSample> gen_digits(int n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("gen_digits: n must be >= 1");
  std::vector<ImageSample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng(split_seed(seed, static_cast<std::uint64_t>(i)));
    ImageSample s;
    s.label = i % 10;
    s.pixels = render_digit(s.label, rng);
    out.push_back(std::move(s));
  }
  return out;
}

Tensor downscale_digit(const Tensor& src, int digit_size) {
  if (src.shape != std::vector<int>{1, 28, 28}) {
    throw ShapeError("downscale_digit: source must be (1,28,28), got " + shape_str(src.shape));
  }
  int block = 0, crop = 0;
  if (digit_size == 12) {
    block = 2;
    crop = 2;  // centered 24x24
  } else if (digit_size == 7) {
    block = 4;
    crop = 0;
  } else {
    throw ConfigError("digit size must be 12 or 7, got " + std::to_string(digit_size));
  }
  Tensor out = Tensor::zeros({1, digit_size, digit_size});
  for (int y = 0; y < digit_size; ++y) {
    for (int x = 0; x < digit_size; ++x) {
      float acc = 0.0f;
      for (int by = 0; by < block; ++by) {
        for (int bx = 0; bx < block; ++bx) {
          const int sy = crop + y * block + by;
          const int sx = crop + x * block + bx;
          acc += src.data[static_cast<std::size_t>(sy) * 28 + sx];
        }
      }
      out.data[static_cast<std::size_t>(y) * digit_size + x] =
          acc / static_cast<float>(block * block);
    }
  }
  return out;
}

Tensor place_digit(const Tensor& small, int x0, int y0, int canvas) {
  if (small.rank() != 3 || small.shape[0] != 1) {
    throw ShapeError("place_digit: digit must be (1,s,s), got " + shape_str(small.shape));
  }
  const int s_h = small.shape[1], s_w = small.shape[2];
  if (x0 < 0 || y0 < 0 || x0 + s_w > canvas || y0 + s_h > canvas) {
    throw ShapeError("place_digit: placement (" + std::to_string(x0) + "," + std::to_string(y0) +
                     ") out of bounds for canvas " + std::to_string(canvas));
  }
  Tensor img = Tensor::zeros({1, canvas, canvas});
  for (int y = 0; y < s_h; ++y) {
    for (int x = 0; x < s_w; ++x) {
      img.data[static_cast<std::size_t>(y0 + y) * canvas + (x0 + x)] =
          small.data[static_cast<std::size_t>(y) * s_w + x];
    }
  }
  return img;
}

}  // namespace lankit::data

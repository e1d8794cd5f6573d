#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "detadapt/geometry.hpp"

namespace testgen {

// Boxes on a coarse grid so ties and exact overlaps actually occur.
inline detadapt::BBox grid_box(std::mt19937_64& rng, int cells = 8) {
  std::uniform_int_distribution<int> pick(0, cells - 1);
  int a = pick(rng), b = pick(rng), c = pick(rng), d = pick(rng);
  if (a > b) std::swap(a, b);
  if (c > d) std::swap(c, d);
  return {a / double(cells), c / double(cells), (b + 1) / double(cells), (d + 1) / double(cells)};
}

inline detadapt::BBox random_box(std::mt19937_64& rng, double min_side = 0.02) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double w = min_side + (1.0 - min_side) * u(rng) * 0.6;
  const double h = min_side + (1.0 - min_side) * u(rng) * 0.6;
  const double x = u(rng) * (1.0 - w), y = u(rng) * (1.0 - h);
  return {x, y, x + w, y + h};
}

// A box near `base`, jittered by up to `amount` of its size per corner.
inline detadapt::BBox jitter(std::mt19937_64& rng, const detadapt::BBox& base, double amount) {
  std::uniform_real_distribution<double> u(-amount, amount);
  const double w = base.width(), h = base.height();
  detadapt::BBox b{base.x1 + u(rng) * w, base.y1 + u(rng) * h, base.x2 + u(rng) * w, base.y2 + u(rng) * h};
  b.x1 = std::clamp(b.x1, 0.0, 0.98);
  b.y1 = std::clamp(b.y1, 0.0, 0.98);
  b.x2 = std::clamp(b.x2, b.x1 + 0.01, 1.0);
  b.y2 = std::clamp(b.y2, b.y1 + 0.01, 1.0);
  return b;
}

// Detections clustered around a few anchors, with scores that sometimes tie.
inline std::vector<detadapt::Detection> clustered(std::mt19937_64& rng, int max_boxes, int categories,
                                                  const std::vector<detadapt::BBox>& anchors) {
  std::uniform_int_distribution<int> count(0, max_boxes), cat(0, categories - 1);
  std::uniform_int_distribution<std::size_t> anchor(0, anchors.size() - 1);
  std::uniform_int_distribution<int> coarse(1, 10);
  std::uniform_real_distribution<double> fine(0.01, 1.0);
  std::bernoulli_distribution tie(0.3);
  std::vector<detadapt::Detection> out;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    const double score = tie(rng) ? coarse(rng) / 10.0 : fine(rng);
    out.push_back({jitter(rng, anchors[anchor(rng)], 0.15), cat(rng), score});
  }
  return out;
}

}  // namespace testgen

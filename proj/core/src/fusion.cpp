#include "detadapt/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "detadapt/error.hpp"

namespace detadapt {

std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold) {
  std::vector<Detection> order(dets.begin(), dets.end());
  sort_by_rank(order);

  std::vector<char> suppressed(order.size(), 0);
  std::vector<Detection> kept;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (suppressed[i]) continue;
    kept.push_back(order[i]);
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      if (suppressed[j] || order[j].category != order[i].category) continue;
      if (iou(order[i].box, order[j].box) > iou_threshold) suppressed[j] = 1;
    }
  }
  return kept;
}

void FusionConfig::validate() const {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0))
    throw ConfigError("fusion iou_threshold must lie in (0, 1)");
  if (source_count < 1) throw ConfigError("fusion source_count must be >= 1");
  if (!(skip_threshold >= 0.0 && skip_threshold < 1.0))
    throw ConfigError("fusion skip_threshold must lie in [0, 1)");
  if (!weights.empty()) {
    if (weights.size() != static_cast<std::size_t>(source_count))
      throw ConfigError("fusion needs exactly one weight per source");
    for (double w : weights)
      if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("fusion weights must be positive");
  }
}

namespace {

struct Cluster {
  int category = 0;
  int members = 0;
  double weight_sum = 0.0;  // sum of weighted scores
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;  // weighted corner sums
  BBox plain;                                      // unweighted corner sums

  // Falls back to the plain mean when every member scored zero.
  BBox fused() const {
    if (weight_sum > 0.0) return {x1 / weight_sum, y1 / weight_sum, x2 / weight_sum, y2 / weight_sum};
    const double n = members;
    return {plain.x1 / n, plain.y1 / n, plain.x2 / n, plain.y2 / n};
  }

  void add(const Detection& d) {
    ++members;
    weight_sum += d.score;
    x1 += d.score * d.box.x1;
    y1 += d.score * d.box.y1;
    x2 += d.score * d.box.x2;
    y2 += d.score * d.box.y2;
    plain.x1 += d.box.x1;
    plain.y1 += d.box.y1;
    plain.x2 += d.box.x2;
    plain.y2 += d.box.y2;
  }
};

}  // namespace

std::vector<Detection> wbf(std::span<const std::vector<Detection>> sources, const FusionConfig& cfg) {
  cfg.validate();
  if (sources.size() != static_cast<std::size_t>(cfg.source_count)) {
    std::ostringstream os;
    os << "wbf configured for " << cfg.source_count << " sources but received " << sources.size();
    throw ConfigError(os.str());
  }

  const double total_sources = static_cast<double>(cfg.source_count);
  std::vector<double> weights(sources.size(), 1.0);
  if (!cfg.weights.empty()) {
    const double sum = std::accumulate(cfg.weights.begin(), cfg.weights.end(), 0.0);
    for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = cfg.weights[i] * total_sources / sum;
  }

  std::map<int, std::vector<Detection>> pools;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    for (const Detection& d : sources[s]) {
      if (d.score < cfg.skip_threshold) continue;
      Detection weighted = d;
      weighted.score = d.score * weights[s];
      pools[d.category].push_back(weighted);
    }
  }

  std::vector<Detection> out;
  for (auto& [category, pool] : pools) {
    sort_by_rank(pool);
    std::vector<Cluster> clusters;
    std::vector<BBox> fused;
    for (const Detection& d : pool) {
      int target = -1;
      double best = cfg.iou_threshold;
      for (std::size_t c = 0; c < clusters.size(); ++c) {
        const double overlap = iou(fused[c], d.box);
        if (overlap > best || (cfg.match == ClusterMatch::first && overlap > cfg.iou_threshold)) {
          target = static_cast<int>(c);
          best = overlap;
          if (cfg.match == ClusterMatch::first) break;
        }
      }
      if (target < 0) {
        clusters.push_back(Cluster{category});
        fused.emplace_back();
        target = static_cast<int>(clusters.size()) - 1;
      }
      clusters[target].add(d);
      fused[target] = clusters[target].fused();
    }

    for (const Cluster& c : clusters) {
      double score = c.weight_sum / c.members;
      if (cfg.score_rescale) score *= std::min(total_sources, static_cast<double>(c.members)) / total_sources;
      out.push_back({c.fused(), category, std::clamp(score, 0.0, 1.0)});
    }
  }
  sort_by_rank(out);
  return out;
}

}  // namespace detadapt

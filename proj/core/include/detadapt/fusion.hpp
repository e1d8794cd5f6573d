#pragma once

#include <span>
#include <vector>

#include "detadapt/geometry.hpp"

namespace detadapt {

// Greedy per-category non-maximum suppression. A box is suppressed when its
// IoU with an already kept, higher-ranked box of the same category exceeds
// iou_threshold. Output is ordered by ranks_before.
std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold = 0.5);

enum class ClusterMatch {
  first,  // join the first cluster (in creation order) above the threshold
  best,   // join the cluster with the highest IoU above the threshold
};

struct FusionConfig {
  double iou_threshold = 0.55;
  int source_count = 1;
  double skip_threshold = 0.0;
  bool score_rescale = true;
  // One positive weight per source; empty means equal weights.
  std::vector<double> weights;
  ClusterMatch match = ClusterMatch::first;

  void validate() const;
};

// Weighted Box Fusion over T prediction sources (models or TTA views).
//
// Boxes are pooled per category, dropping those scoring below skip_threshold,
// and visited in rank order of their weighted score w_src * s. Each box joins
// a cluster whose running fused box overlaps it by IoU > iou_threshold, or
// opens a new cluster. A cluster's fused box is the weighted-score mean of its
// members' corners; its fused score is the mean weighted score, multiplied by
// min(T, N) / T when score_rescale is set. Source weights are normalized to
// mean 1 so unit weights reproduce the plain formula, and fused scores are
// clamped to [0, 1]. Throws ConfigError if sources.size() != source_count.
std::vector<Detection> wbf(std::span<const std::vector<Detection>> sources, const FusionConfig& cfg);

}  // namespace detadapt

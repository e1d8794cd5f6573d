#pragma once

// Deliberately slow reference implementations. They recompute everything from
// member lists instead of keeping running state, and share no code with the
// library besides the plain data types.

#include <vector>

#include "detadapt/eval.hpp"
#include "detadapt/fusion.hpp"

namespace oracle {

double iou(const detadapt::BBox& a, const detadapt::BBox& b);

// Strict total order used by every oracle: score desc, then corners, then category.
bool before(const detadapt::Detection& a, const detadapt::Detection& b);

std::vector<detadapt::Detection> wbf(const std::vector<std::vector<detadapt::Detection>>& sources,
                                     const detadapt::FusionConfig& cfg);

std::vector<detadapt::Detection> nms(const std::vector<detadapt::Detection>& dets, double thr);

// Area under the precision envelope by explicit max over later ranks (O(n^2)).
double average_precision(const std::vector<bool>& ranked_tp, int num_gt);
double average_precision_11pt(const std::vector<bool>& ranked_tp, int num_gt);

double map50(const std::vector<detadapt::ImageDetection>& dets, const std::vector<detadapt::GroundTruthBox>& gts,
             int num_categories, double iou_min = 0.5, bool eleven_point = false);

}  // namespace oracle

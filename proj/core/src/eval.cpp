#include "detadapt/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "detadapt/error.hpp"

namespace detadapt {

std::vector<bool> greedy_match(std::span<const Detection> dets, std::span<const BBox> gts, double iou_min) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return ranks_before(dets[a], dets[b]); });

  std::vector<bool> flags(dets.size(), false);
  std::vector<char> taken(gts.size(), 0);
  for (std::size_t idx : order) {
    int best = -1;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double overlap = iou(dets[idx].box, gts[g]);
      if (overlap > best_iou) {
        best_iou = overlap;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0 && best_iou >= iou_min) {
      taken[best] = 1;
      flags[idx] = true;
    }
  }
  return flags;
}

double average_precision(const std::vector<bool>& ranked_flags, int num_gt, Interpolation interpolation) {
  if (num_gt <= 0 || ranked_flags.empty()) return 0.0;

  const std::size_t n = ranked_flags.size();
  std::vector<double> precision(n), recall(n);
  int tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (ranked_flags[i]) ++tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / num_gt;
  }
  // Precision envelope: best precision at this rank or any later one.
  for (std::size_t i = n - 1; i-- > 0;) precision[i] = std::max(precision[i], precision[i + 1]);

  if (interpolation == Interpolation::eleven_point) {
    double sum = 0.0;
    std::size_t i = 0;
    for (int k = 0; k <= 10; ++k) {
      const double r = k / 10.0;
      while (i < n && recall[i] < r - 1e-12) ++i;
      if (i < n) sum += precision[i];
    }
    return sum / 11.0;
  }

  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (recall[i] > prev_recall) {
      ap += (recall[i] - prev_recall) * precision[i];
      prev_recall = recall[i];
    }
  }
  return std::clamp(ap, 0.0, 1.0);
}

EvalReport evaluate(std::span<const ImageDetection> dets, std::span<const GroundTruthBox> gts,
                    std::span<const ImageId> image_ids, int num_categories, const EvalOptions& opts) {
  if (num_categories < 1) throw ConfigError("evaluation needs at least one category");
  const std::set<ImageId> known(image_ids.begin(), image_ids.end());

  using Key = std::pair<ImageId, int>;
  std::map<Key, std::vector<Detection>> det_groups;
  std::map<Key, std::vector<BBox>> gt_groups;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const auto& d = dets[i];
    if (!known.contains(d.image_id))
      throw DataError("detection " + std::to_string(i) + " references unknown image id " + std::to_string(d.image_id));
    if (d.det.category < 0 || d.det.category >= num_categories)
      throw DataError("detection " + std::to_string(i) + " has unknown category " + std::to_string(d.det.category));
    det_groups[{d.image_id, d.det.category}].push_back(d.det);
  }
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const auto& g = gts[i];
    if (!known.contains(g.image_id))
      throw DataError("ground truth " + std::to_string(i) + " references unknown image id " +
                      std::to_string(g.image_id));
    if (g.category < 0 || g.category >= num_categories)
      throw DataError("ground truth " + std::to_string(i) + " has unknown category " + std::to_string(g.category));
    gt_groups[{g.image_id, g.category}].push_back(g.box);
  }

  struct Ranked {
    ImageId image_id;
    Detection det;
    bool tp;
  };
  std::vector<std::vector<Ranked>> per_class(num_categories);
  std::vector<int> gt_count(num_categories, 0);
  for (const auto& [key, boxes] : gt_groups) gt_count[key.second] += static_cast<int>(boxes.size());

  static const std::vector<BBox> kNoBoxes;
  for (const auto& [key, group] : det_groups) {
    const auto it = gt_groups.find(key);
    const std::vector<BBox>& truth = it == gt_groups.end() ? kNoBoxes : it->second;
    const std::vector<bool> flags = greedy_match(group, truth, opts.iou_min);
    for (std::size_t i = 0; i < group.size(); ++i) per_class[key.second].push_back({key.first, group[i], flags[i]});
  }

  EvalReport report;
  double ap_sum = 0.0;
  for (int c = 0; c < num_categories; ++c) {
    auto& ranked = per_class[c];
    std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
      if (a.det.score != b.det.score) return a.det.score > b.det.score;
      if (a.image_id != b.image_id) return a.image_id < b.image_id;
      return ranks_before(a.det, b.det);
    });
    std::vector<bool> flags;
    flags.reserve(ranked.size());
    for (const Ranked& r : ranked) flags.push_back(r.tp);

    ClassResult cr;
    cr.category = c;
    cr.num_gt = gt_count[c];
    cr.true_positives = static_cast<int>(std::count(flags.begin(), flags.end(), true));
    cr.false_positives = static_cast<int>(flags.size()) - cr.true_positives;
    cr.ap = average_precision(flags, cr.num_gt, opts.interpolation);
    cr.detections_without_gt = cr.num_gt == 0 && !flags.empty();
    if (cr.num_gt > 0) {
      ap_sum += cr.ap;
      ++report.classes_with_gt;
    }
    report.classes.push_back(cr);
  }
  report.map50 = report.classes_with_gt > 0 ? ap_sum / report.classes_with_gt : 0.0;
  return report;
}

std::string EvalReport::to_text(std::span<const std::string> category_names) const {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %8s %6s %6s %6s\n", "category", "AP50", "TP", "FP", "GT");
  os << line;
  for (const ClassResult& c : classes) {
    const std::string name = static_cast<std::size_t>(c.category) < category_names.size()
                                 ? category_names[c.category]
                                 : std::to_string(c.category);
    std::snprintf(line, sizeof line, "%-16s %8.4f %6d %6d %6d%s\n", name.c_str(), c.ap, c.true_positives,
                  c.false_positives, c.num_gt, c.detections_without_gt ? "  (no ground truth)" : "");
    os << line;
  }
  std::snprintf(line, sizeof line, "mAP50 %.6f over %d classes\n", map50, classes_with_gt);
  os << line;
  return os.str();
}

}  // namespace detadapt

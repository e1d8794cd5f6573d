#pragma once

#include <span>
#include <string>
#include <vector>

#include "detadapt/geometry.hpp"
#include "detadapt/pseudo_label.hpp"

namespace detadapt {

struct GroundTruthBox {
  ImageId image_id = 0;
  BBox box;
  int category = 0;
};

struct ImageDetection {
  ImageId image_id = 0;
  Detection det;
};

enum class Interpolation {
  all_point,    // area under the monotone precision envelope
  eleven_point  // mean envelope precision at recall 0, 0.1, ..., 1
};

struct EvalOptions {
  double iou_min = 0.5;
  Interpolation interpolation = Interpolation::all_point;
};

// Matches detections of one image and one category against its ground truth.
// Detections are visited in rank order; each claims the still-unmatched
// ground truth it overlaps most, provided IoU >= iou_min. The returned flags
// (true = TP) are indexed like `dets`.
std::vector<bool> greedy_match(std::span<const Detection> dets, std::span<const BBox> gts, double iou_min = 0.5);

// flags must already be in descending score order.
double average_precision(const std::vector<bool>& ranked_flags, int num_gt,
                         Interpolation interpolation = Interpolation::all_point);

struct ClassResult {
  int category = 0;
  double ap = 0.0;
  int true_positives = 0;
  int false_positives = 0;
  int num_gt = 0;
  // Detections were made for a category without ground truth. AP is 0 and
  // the class does not enter the mean.
  bool detections_without_gt = false;
};

struct EvalReport {
  std::vector<ClassResult> classes;  // one per category in [0, K)
  double map50 = 0.0;                // mean AP over classes with num_gt >= 1
  int classes_with_gt = 0;

  std::string to_text(std::span<const std::string> category_names = {}) const;
};

// Throws DataError when a detection or ground truth references an image id
// absent from `image_ids`, or a category outside [0, num_categories).
EvalReport evaluate(std::span<const ImageDetection> dets, std::span<const GroundTruthBox> gts,
                    std::span<const ImageId> image_ids, int num_categories, const EvalOptions& opts = {});

}  // namespace detadapt

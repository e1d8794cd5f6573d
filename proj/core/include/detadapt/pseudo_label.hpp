#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "detadapt/geometry.hpp"

namespace detadapt {

using ImageId = std::int64_t;

// Image-level weak label: the categories known to be present in one image.
struct ClassPrior {
  ImageId image_id = 0;
  std::set<int> categories;

  bool admits(int category) const { return categories.contains(category); }
  // Throws ConfigError when empty or when an id falls outside [0, num_categories).
  void validate(int num_categories) const;
};

struct PseudoLabelConfig {
  double score_threshold = 0.5;
  bool use_class_prior = true;

  static PseudoLabelConfig weakly_supervised() { return {0.5, true}; }
  static PseudoLabelConfig test_time() { return {0.7, false}; }

  void validate() const;
};

std::vector<Detection> filter_by_prior(std::span<const Detection> dets, const ClassPrior& prior);

// Keeps detections with score >= threshold (inclusive), order preserved.
std::vector<Detection> filter_by_score(std::span<const Detection> dets, double threshold);

// Teacher outputs on a weakly augmented image -> pseudo ground truth.
// An empty result means the image carries no usable supervision and should
// be skipped by the trainer rather than treated as background.
std::vector<Detection> generate_pseudo_labels(std::span<const Detection> teacher_dets,
                                              const ClassPrior* prior,
                                              const PseudoLabelConfig& cfg);

}  // namespace detadapt

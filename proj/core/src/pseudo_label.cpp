#include "detadapt/pseudo_label.hpp"

#include "detadapt/error.hpp"

namespace detadapt {

void ClassPrior::validate(int num_categories) const {
  if (categories.empty())
    throw ConfigError("class prior for image " + std::to_string(image_id) + " is empty");
  for (int c : categories)
    if (c < 0 || c >= num_categories)
      throw ConfigError("class prior for image " + std::to_string(image_id) + " has unknown category " +
                        std::to_string(c));
}

void PseudoLabelConfig::validate() const {
  if (!(score_threshold >= 0.0 && score_threshold <= 1.0))
    throw ConfigError("pseudo-label score_threshold must lie in [0, 1]");
}

std::vector<Detection> filter_by_prior(std::span<const Detection> dets, const ClassPrior& prior) {
  std::vector<Detection> out;
  for (const Detection& d : dets)
    if (prior.admits(d.category)) out.push_back(d);
  return out;
}

std::vector<Detection> filter_by_score(std::span<const Detection> dets, double threshold) {
  std::vector<Detection> out;
  for (const Detection& d : dets)
    if (d.score >= threshold) out.push_back(d);
  return out;
}

std::vector<Detection> generate_pseudo_labels(std::span<const Detection> teacher_dets,
                                              const ClassPrior* prior,
                                              const PseudoLabelConfig& cfg) {
  std::vector<Detection> kept = filter_by_score(teacher_dets, cfg.score_threshold);
  if (prior != nullptr && cfg.use_class_prior) kept = filter_by_prior(kept, *prior);
  return kept;
}

}  // namespace detadapt

#include "detadapt/pipeline.hpp"

#include <algorithm>
#include <set>

#include "detadapt/augment.hpp"
#include "detadapt/error.hpp"
#include "detadapt/random.hpp"

namespace detadapt {

TtaSpec TtaSpec::multi_scale_flip() {
  TtaSpec spec;
  for (int k = 0; k < 11; ++k) {
    const int height = 480 + 32 * k;
    spec.views.push_back(GeomTransform::rescale(height, false));
    spec.views.push_back(GeomTransform::rescale(height, true));
  }
  return spec;
}

void TtaSpec::validate() const {
  if (views.empty()) throw ConfigError("TTA spec needs at least one view");
  for (const GeomTransform& t : views)
    if (t.target_height < 1 || t.source_height < 1) throw ConfigError("TTA view has a non-positive height");
}

std::vector<ViewDetections> tta_expand(const Scene& scene, const TtaSpec& spec, const Detector& detector,
                                       std::uint64_t stream) {
  spec.validate();
  std::vector<ViewDetections> out;
  out.reserve(spec.views.size());
  for (std::size_t i = 0; i < spec.views.size(); ++i) {
    const GeomTransform& t = spec.views[i];
    try {
      const Scene view = apply_geometry(scene, t);
      out.push_back({t, detector.detect(view, derive_seed(stream, {i}))});
    } catch (const std::exception& e) {
      throw DataError("detector failed on view " + std::to_string(i) + " (" + to_string(t) + "): " + e.what());
    }
  }
  return out;
}

std::vector<Detection> tta_merge(std::span<const ViewDetections> views, FusionConfig cfg) {
  if (views.empty()) return {};
  std::vector<std::vector<Detection>> sources;
  sources.reserve(views.size());
  for (const ViewDetections& v : views) sources.push_back(apply_transform(v.dets, invert_transform(v.transform)));
  if (sources.size() == 1) {
    sort_by_rank(sources.front());
    return sources.front();
  }
  cfg.source_count = static_cast<int>(views.size());
  cfg.weights.clear();
  return wbf(sources, cfg);
}

EnsembleResult ensemble_fuse(const EnsembleSpec& spec) {
  if (spec.sources.empty()) throw ConfigError("ensemble needs at least one source");
  const auto& reference = spec.sources.front();
  std::set<int> vocabulary(reference.vocabulary.begin(), reference.vocabulary.end());
  std::set<ImageId> images;
  for (const EnsembleSource& s : spec.sources) {
    if (!(s.weight > 0.0)) throw ConfigError("ensemble source '" + s.name + "' has a non-positive weight");
    if (std::set<int>(s.vocabulary.begin(), s.vocabulary.end()) != vocabulary)
      throw ConfigError("ensemble source '" + s.name + "' uses a different category vocabulary than '" +
                        reference.name + "'");
    for (const auto& [id, dets] : s.predictions) {
      images.insert(id);
      if (vocabulary.empty()) continue;
      for (const Detection& d : dets)
        if (!vocabulary.contains(d.category))
          throw DataError("ensemble source '" + s.name + "' predicts category " + std::to_string(d.category) +
                          " outside its vocabulary on image " + std::to_string(id));
    }
  }

  FusionConfig cfg = spec.fusion;
  cfg.source_count = static_cast<int>(spec.sources.size());
  cfg.weights.clear();
  for (const EnsembleSource& s : spec.sources) cfg.weights.push_back(s.weight);

  EnsembleResult result;
  for (ImageId id : images) {
    std::vector<std::vector<Detection>> per_source;
    per_source.reserve(spec.sources.size());
    for (const EnsembleSource& s : spec.sources) {
      const auto it = s.predictions.find(id);
      if (it == s.predictions.end()) {
        result.warnings.push_back("source '" + s.name + "' has no predictions for image " + std::to_string(id));
        per_source.emplace_back();
      } else {
        per_source.push_back(it->second);
      }
    }
    result.fused[id] = wbf(per_source, cfg);
  }
  return result;
}

}  // namespace detadapt

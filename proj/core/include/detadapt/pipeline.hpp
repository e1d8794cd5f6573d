#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "detadapt/fusion.hpp"
#include "detadapt/geometry.hpp"
#include "detadapt/image.hpp"
#include "detadapt/pseudo_label.hpp"

namespace detadapt {

struct TtaSpec {
  std::vector<GeomTransform> views;

  static TtaSpec identity() { return {{GeomTransform::identity()}}; }
  // 11 heights 480, 512, ..., 800, each with and without horizontal flip.
  // The unflipped 800 view is the plain single-scale inference.
  static TtaSpec multi_scale_flip();
  void validate() const;
};

// Anything that turns an image view into detections in that view's frame.
// `stream` seeds any randomness so repeated calls are reproducible.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::vector<Detection> detect(const Scene& view, std::uint64_t stream) const = 0;
};

struct ViewDetections {
  GeomTransform transform;
  std::vector<Detection> dets;  // in the transformed view's frame
};

// Runs the detector once per view. The stream of view i is derived from
// (stream, i). A detector exception is rethrown as DataError naming the view.
std::vector<ViewDetections> tta_expand(const Scene& scene, const TtaSpec& spec, const Detector& detector,
                                       std::uint64_t stream);

// Maps every view back to the original frame and fuses with WBF using one
// source per view (cfg.source_count is overridden by the view count). A
// single view is only mapped back and ranked, never self-clustered.
std::vector<Detection> tta_merge(std::span<const ViewDetections> views, FusionConfig cfg);

using PerImageDetections = std::map<ImageId, std::vector<Detection>>;

struct EnsembleSource {
  std::string name;
  PerImageDetections predictions;
  double weight = 1.0;
  // Category ids this source may emit; empty means unconstrained.
  std::vector<int> vocabulary;
};

struct EnsembleSpec {
  std::vector<EnsembleSource> sources;
  FusionConfig fusion;  // source_count and weights are taken from `sources`
};

struct EnsembleResult {
  PerImageDetections fused;
  std::vector<std::string> warnings;
};

// Per-image WBF across all sources. Images missing from a source count as
// empty predictions and produce a warning. Throws ConfigError for an empty
// source list, non-positive weights, or sources with different vocabularies,
// and DataError when a source predicts a category outside its vocabulary.
EnsembleResult ensemble_fuse(const EnsembleSpec& spec);

}  // namespace detadapt

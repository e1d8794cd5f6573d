#pragma once

// COCO-convention JSON files: annotation files for ground truth, flat result
// lists for detections. Boxes are absolute [x, y, w, h] on disk and
// normalized xyxy in memory.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "detadapt/eval.hpp"
#include "detadapt/pipeline.hpp"
#include "detadapt/pseudo_label.hpp"

namespace detadapt::io {

struct ImageInfo {
  ImageSize size;
  std::string file_name;
};

// Categories are renumbered to contiguous indices [0, K) in ascending COCO id
// order; files always carry the original ids.
struct GroundTruthIndex {
  std::map<ImageId, ImageInfo> images;
  std::vector<int> category_ids;  // index -> COCO id
  std::vector<std::string> category_names;
  std::vector<GroundTruthBox> boxes;

  int num_categories() const { return static_cast<int>(category_ids.size()); }
  std::vector<ImageId> image_ids() const;
  // Throws DataError for unknown ids.
  int category_index(int coco_id) const;
  const ImageInfo& image(ImageId id) const;
};

// Throws DataError naming the file, record index and reason.
GroundTruthIndex load_ground_truth(const std::filesystem::path& path);
GroundTruthIndex parse_ground_truth(const std::string& text, const std::string& origin);

// Boxes reaching past the image border are clipped to it; a box with no
// area left is an error.
std::vector<ImageDetection> load_detections(const std::filesystem::path& path, const GroundTruthIndex& index);
std::vector<ImageDetection> parse_detections(const std::string& text, const std::string& origin,
                                             const GroundTruthIndex& index);

// Ordered by image id, then descending score.
std::string format_detections(std::span<const ImageDetection> dets, const GroundTruthIndex& index);
void save_detections(std::span<const ImageDetection> dets, const GroundTruthIndex& index,
                     const std::filesystem::path& path);

PerImageDetections group_by_image(std::span<const ImageDetection> dets);
std::vector<ImageDetection> flatten(const PerImageDetections& per_image);

// {"<image_id>": [category ids...], ...}; categories are mapped to indices.
std::map<ImageId, ClassPrior> load_priors(const std::filesystem::path& path, const GroundTruthIndex& index);

// Index with no ground-truth boxes whose images span the detections: every
// image gets the bounding extent of its boxes as its frame, and categories
// are the ids seen in the files. Lets fuse/nms/filter run without --gt,
// since IoU and box averaging are invariant to a common frame.
GroundTruthIndex frame_from_detections(const std::vector<std::filesystem::path>& paths);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace detadapt::io

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace detadapt {

// Axis-aligned box in normalized corner coordinates (fractions of image
// width/height). A valid box satisfies 0 <= x1 < x2 <= 1 and 0 <= y1 < y2 <= 1.
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x1 + x2); }
  double center_y() const { return 0.5 * (y1 + y2); }
  bool valid() const;

  friend bool operator==(const BBox&, const BBox&) = default;
};

// Validating constructor; throws DataError for degenerate or out-of-range boxes.
BBox make_box(double x1, double y1, double x2, double y2);

// Clamps to the unit square. Returns nullopt when nothing of positive area is left.
std::optional<BBox> clip_box(const BBox& b);

struct Detection {
  BBox box;
  int category = 0;
  double score = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

// Deterministic ranking: score desc, then x1, y1, x2, y2 asc, then category asc.
bool ranks_before(const Detection& a, const Detection& b);
void sort_by_rank(std::vector<Detection>& dets);

struct ImageSize {
  int width = 1;
  int height = 1;

  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

// Height the default single-scale view is rendered at (1333x800 inference).
inline constexpr int kReferenceHeight = 800;
inline constexpr int kReferenceWidth = 1333;

// Aspect-preserving rescale from source_height to target_height, optionally
// followed by a horizontal flip. The rescale is the identity on normalized
// coordinates; only the flip moves boxes.
struct GeomTransform {
  bool hflip = false;
  int target_height = kReferenceHeight;
  int source_height = kReferenceHeight;

  static GeomTransform identity() { return {}; }
  static GeomTransform rescale(int target_height, bool hflip = false) {
    return {hflip, target_height, kReferenceHeight};
  }

  bool is_identity() const { return !hflip && target_height == source_height; }
  double scale() const { return static_cast<double>(target_height) / source_height; }
  ImageSize apply(ImageSize s) const;

  friend bool operator==(const GeomTransform&, const GeomTransform&) = default;
};

double iou(const BBox& a, const BBox& b);

BBox flip_horizontal(const BBox& b);
BBox apply_transform(const BBox& b, const GeomTransform& t);
Detection apply_transform(const Detection& d, const GeomTransform& t);
std::vector<Detection> apply_transform(std::span<const Detection> dets, const GeomTransform& t);
GeomTransform invert_transform(const GeomTransform& t);

// Mini-syntax used on the command line: "id", "hflip", "h480", "hflip+h512".
GeomTransform parse_transform(std::string_view text);
std::string to_string(const GeomTransform& t);

// COCO-style absolute box: top-left corner plus extent, in pixels.
struct AbsoluteBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
};

AbsoluteBox to_absolute(const BBox& b, ImageSize s);

// Throws DataError when w <= 0, h <= 0, or the box leaves the image by more
// than kAbsoluteTolerance pixels. Small overhangs within tolerance are clipped.
BBox from_absolute(const AbsoluteBox& a, ImageSize s);
inline constexpr double kAbsoluteTolerance = 1e-6;

}  // namespace detadapt

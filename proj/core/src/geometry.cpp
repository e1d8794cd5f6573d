#include "detadapt/geometry.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>
#include <tuple>

#include "detadapt/error.hpp"

namespace detadapt {

bool BBox::valid() const {
  return 0.0 <= x1 && x1 < x2 && x2 <= 1.0 && 0.0 <= y1 && y1 < y2 && y2 <= 1.0;
}

BBox make_box(double x1, double y1, double x2, double y2) {
  BBox b{x1, y1, x2, y2};
  if (!b.valid()) {
    std::ostringstream os;
    os << "invalid box (" << x1 << ", " << y1 << ", " << x2 << ", " << y2 << ")";
    throw DataError(os.str());
  }
  return b;
}

std::optional<BBox> clip_box(const BBox& b) {
  BBox c{std::clamp(b.x1, 0.0, 1.0), std::clamp(b.y1, 0.0, 1.0), std::clamp(b.x2, 0.0, 1.0),
         std::clamp(b.y2, 0.0, 1.0)};
  if (!(c.x1 < c.x2) || !(c.y1 < c.y2)) return std::nullopt;
  return c;
}

bool ranks_before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  return std::tie(a.box.x1, a.box.y1, a.box.x2, a.box.y2, a.category) <
         std::tie(b.box.x1, b.box.y1, b.box.x2, b.box.y2, b.category);
}

void sort_by_rank(std::vector<Detection>& dets) {
  std::stable_sort(dets.begin(), dets.end(), ranks_before);
}

ImageSize GeomTransform::apply(ImageSize s) const {
  const double k = scale();
  return {std::max(1, static_cast<int>(std::lround(s.width * k))),
          std::max(1, static_cast<int>(std::lround(s.height * k)))};
}

double iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

BBox flip_horizontal(const BBox& b) { return {1.0 - b.x2, b.y1, 1.0 - b.x1, b.y2}; }

BBox apply_transform(const BBox& b, const GeomTransform& t) {
  // Rescale leaves normalized coordinates alone.
  BBox out = t.hflip ? flip_horizontal(b) : b;
  out.x1 = std::clamp(out.x1, 0.0, 1.0);
  out.x2 = std::clamp(out.x2, 0.0, 1.0);
  return out;
}

Detection apply_transform(const Detection& d, const GeomTransform& t) {
  return {apply_transform(d.box, t), d.category, d.score};
}

std::vector<Detection> apply_transform(std::span<const Detection> dets, const GeomTransform& t) {
  std::vector<Detection> out;
  out.reserve(dets.size());
  for (const Detection& d : dets) out.push_back(apply_transform(d, t));
  return out;
}

GeomTransform invert_transform(const GeomTransform& t) {
  return {t.hflip, t.source_height, t.target_height};
}

namespace {

int parse_height(std::string_view digits, std::string_view text) {
  int h = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), h);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || h <= 0)
    throw ConfigError("bad transform height in '" + std::string(text) + "'");
  return h;
}

}  // namespace

GeomTransform parse_transform(std::string_view text) {
  GeomTransform t;
  if (text == "id") return t;
  std::string_view rest = text;
  bool seen_any = false, seen_height = false;
  while (!rest.empty()) {
    const auto plus = rest.find('+');
    const std::string_view part = rest.substr(0, plus);
    if (part == "hflip" && !t.hflip) {
      t.hflip = true;
    } else if (part.size() > 1 && part[0] == 'h' && !seen_height && std::isdigit(static_cast<unsigned char>(part[1]))) {
      seen_height = true;
      // hN or hN/M (rescale to N from source height M).
      const std::string_view digits = part.substr(1);
      const auto slash = digits.find('/');
      t.target_height = parse_height(digits.substr(0, slash), text);
      if (slash != std::string_view::npos) t.source_height = parse_height(digits.substr(slash + 1), text);
    } else {
      throw ConfigError("unrecognized transform '" + std::string(text) + "'");
    }
    seen_any = true;
    if (plus == std::string_view::npos) break;
    rest = rest.substr(plus + 1);
    if (rest.empty()) throw ConfigError("trailing '+' in transform '" + std::string(text) + "'");
  }
  if (!seen_any) throw ConfigError("empty transform");
  return t;
}

std::string to_string(const GeomTransform& t) {
  if (t.is_identity() && t.source_height == kReferenceHeight) return "id";
  std::string s;
  if (t.hflip) s = "hflip";
  if (t.target_height != t.source_height || t.source_height != kReferenceHeight) {
    if (!s.empty()) s += '+';
    s += 'h' + std::to_string(t.target_height);
    if (t.source_height != kReferenceHeight) s += "/" + std::to_string(t.source_height);
  }
  return s;
}

AbsoluteBox to_absolute(const BBox& b, ImageSize s) {
  return {b.x1 * s.width, b.y1 * s.height, b.width() * s.width, b.height() * s.height};
}

BBox from_absolute(const AbsoluteBox& a, ImageSize s) {
  if (!(a.w > 0.0) || !(a.h > 0.0)) throw DataError("bbox has non-positive width or height");
  if (!std::isfinite(a.x) || !std::isfinite(a.y) || !std::isfinite(a.w) || !std::isfinite(a.h))
    throw DataError("bbox has non-finite coordinates");
  const double tol = kAbsoluteTolerance;
  if (a.x < -tol || a.y < -tol || a.x + a.w > s.width + tol || a.y + a.h > s.height + tol)
    throw DataError("bbox extends beyond the image");
  BBox b{a.x / s.width, a.y / s.height, (a.x + a.w) / s.width, (a.y + a.h) / s.height};
  const auto clipped = clip_box(b);
  if (!clipped) throw DataError("bbox is degenerate after clipping");
  return *clipped;
}

}  // namespace detadapt

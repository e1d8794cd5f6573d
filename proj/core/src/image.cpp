#include "detadapt/image.hpp"

#include <algorithm>
#include <cmath>

#include "detadapt/error.hpp"

namespace detadapt {

Image::Image(int width, int height, std::uint8_t fill)
    : width_(width), height_(height), pixels_(static_cast<std::size_t>(width) * height * 3, fill) {
  if (width < 1 || height < 1) throw ConfigError("image dimensions must be positive");
}

Image Image::shell(int width, int height) {
  if (width < 1 || height < 1) throw ConfigError("image dimensions must be positive");
  Image img;
  img.width_ = width;
  img.height_ = height;
  return img;
}

Image resize_nearest(const Image& img, ImageSize to) {
  if (!img.has_pixels()) return Image::shell(to.width, to.height);
  Image out(to.width, to.height);
  for (int y = 0; y < to.height; ++y) {
    const int sy = std::min(img.height() - 1, static_cast<int>((y + 0.5) * img.height() / to.height));
    for (int x = 0; x < to.width; ++x) {
      const int sx = std::min(img.width() - 1, static_cast<int>((x + 0.5) * img.width() / to.width));
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(sx, sy, c);
    }
  }
  return out;
}

PixelRect pixel_extent(const BBox& b, ImageSize s) {
  constexpr double eps = 1e-9;
  PixelRect r{static_cast<int>(std::floor(b.x1 * s.width + eps)),
              static_cast<int>(std::floor(b.y1 * s.height + eps)),
              static_cast<int>(std::ceil(b.x2 * s.width - eps)),
              static_cast<int>(std::ceil(b.y2 * s.height - eps))};
  r.x0 = std::clamp(r.x0, 0, s.width - 1);
  r.y0 = std::clamp(r.y0, 0, s.height - 1);
  r.x1 = std::clamp(r.x1, r.x0 + 1, s.width);
  r.y1 = std::clamp(r.y1, r.y0 + 1, s.height);
  return r;
}

BBox box_from_pixels(const PixelRect& r, ImageSize s) {
  return {static_cast<double>(r.x0) / s.width, static_cast<double>(r.y0) / s.height,
          static_cast<double>(r.x1) / s.width, static_cast<double>(r.y1) / s.height};
}

Mask Mask::empty(const PixelRect& window) {
  return {window, std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(0L, window.area())), 0)};
}

bool Mask::test(int x, int y) const {
  if (!window.contains(x, y)) return false;
  return bits[static_cast<std::size_t>(y - window.y0) * window.width() + (x - window.x0)] != 0;
}

void Mask::set(int x, int y, bool on) {
  if (!window.contains(x, y)) return;
  bits[static_cast<std::size_t>(y - window.y0) * window.width() + (x - window.x0)] = on ? 1 : 0;
}

long Mask::count() const { return static_cast<long>(std::count(bits.begin(), bits.end(), 1)); }

std::optional<PixelRect> Mask::bounds() const {
  int x0 = window.x1, y0 = window.y1, x1 = window.x0, y1 = window.y0;
  for (int y = window.y0; y < window.y1; ++y)
    for (int x = window.x0; x < window.x1; ++x)
      if (test(x, y)) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x + 1);
        y1 = std::max(y1, y + 1);
      }
  if (x1 <= x0) return std::nullopt;
  return PixelRect{x0, y0, x1, y1};
}

void Scene::add(const LabeledBox& box, std::optional<Mask> mask) {
  boxes.push_back(box);
  masks.push_back(std::move(mask));
}

void Scene::validate() const {
  if (masks.size() != boxes.size()) throw DataError("scene mask list does not match its box list");
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (!boxes[i].box.valid()) throw DataError("scene box " + std::to_string(i) + " is invalid");
    if (!masks[i]) continue;
    const PixelRect extent = pixel_extent(boxes[i].box, image.size());
    const auto b = masks[i]->bounds();
    if (!b) continue;
    if (b->x0 < extent.x0 || b->y0 < extent.y0 || b->x1 > extent.x1 || b->y1 > extent.y1)
      throw DataError("scene mask " + std::to_string(i) + " leaves its box");
  }
}

}  // namespace detadapt

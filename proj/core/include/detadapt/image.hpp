#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "detadapt/geometry.hpp"

namespace detadapt {

// Interleaved 8-bit RGB raster, row-major. An image with an empty pixel
// buffer is a "shell": it only carries dimensions, which lets label-only
// augmentation passes track geometry without touching pixels.
class Image {
 public:
  Image() = default;
  Image(int width, int height, std::uint8_t fill = 0);
  static Image shell(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }
  ImageSize size() const { return {width_, height_}; }
  bool has_pixels() const { return !pixels_.empty(); }

  std::uint8_t& at(int x, int y, int c) { return pixels_[index(x, y, c)]; }
  std::uint8_t at(int x, int y, int c) const { return pixels_[index(x, y, c)]; }
  std::vector<std::uint8_t>& pixels() { return pixels_; }
  const std::vector<std::uint8_t>& pixels() const { return pixels_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3 + c;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

Image resize_nearest(const Image& img, ImageSize to);

// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  long area() const { return static_cast<long>(width()) * height(); }
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }

  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

// Pixels touched by a normalized box (at least one pixel wide and tall).
PixelRect pixel_extent(const BBox& b, ImageSize s);
BBox box_from_pixels(const PixelRect& r, ImageSize s);

// Binary mask stored over a local window placed at (x0, y0) in image pixels.
struct Mask {
  PixelRect window;
  std::vector<std::uint8_t> bits;  // window.width() * window.height(), row-major

  static Mask empty(const PixelRect& window);
  bool test(int x, int y) const;  // image coordinates
  void set(int x, int y, bool on);
  long count() const;
  // Tight bounding rectangle of the set pixels; nullopt if none are set.
  std::optional<PixelRect> bounds() const;

  friend bool operator==(const Mask&, const Mask&) = default;
};

struct LabeledBox {
  BBox box;
  int category = 0;

  friend bool operator==(const LabeledBox&, const LabeledBox&) = default;
};

// Image plus object labels. masks[i], when present, is the visible mask of
// boxes[i] and lies inside that box's pixel extent. domain_shift records
// the nuisance level of the image (0 for clean source-domain renders).
struct Scene {
  Image image;
  std::vector<LabeledBox> boxes;
  std::vector<std::optional<Mask>> masks;  // always boxes.size() entries
  double domain_shift = 0.0;

  void add(const LabeledBox& box, std::optional<Mask> mask = std::nullopt);
  // Throws DataError when an invariant is violated.
  void validate() const;

  friend bool operator==(const Scene&, const Scene&) = default;
};

}  // namespace detadapt

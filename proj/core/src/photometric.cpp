#include <algorithm>
#include <cmath>

#include "detadapt/augment.hpp"
#include "detadapt/error.hpp"
#include "detadapt/random.hpp"

namespace detadapt {

namespace {

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0)); }

void color_jitter(Image& img, const PhotometricParams& p) {
  const std::size_t n = static_cast<std::size_t>(img.width()) * img.height();
  std::vector<double> v(img.pixels().begin(), img.pixels().end());
  double mean = 0.0;
  for (double& x : v) {
    x *= p.brightness;
    mean += x;
  }
  mean /= static_cast<double>(v.size());
  for (double& x : v) x = (x - mean) * p.contrast + mean;
  for (std::size_t i = 0; i < n; ++i) {
    double* px = &v[i * 3];
    const double gray = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
    for (int c = 0; c < 3; ++c) px[c] = gray + (px[c] - gray) * p.saturation;
  }
  for (std::size_t i = 0; i < v.size(); ++i) img.pixels()[i] = to_byte(v[i]);
}

// Separable box blur with clamped borders, radius = severity.
void blur(Image& img, int radius) {
  const int W = img.width(), H = img.height();
  Image tmp = img;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < 3; ++c) {
        int sum = 0;
        for (int k = -radius; k <= radius; ++k) sum += img.at(std::clamp(x + k, 0, W - 1), y, c);
        tmp.at(x, y, c) = to_byte(static_cast<double>(sum) / (2 * radius + 1));
      }
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < 3; ++c) {
        int sum = 0;
        for (int k = -radius; k <= radius; ++k) sum += tmp.at(x, std::clamp(y + k, 0, H - 1), c);
        img.at(x, y, c) = to_byte(static_cast<double>(sum) / (2 * radius + 1));
      }
}

void gaussian_noise(Image& img, int severity, std::uint64_t seed) {
  Rng rng(seed);
  const double sigma = 6.0 * severity;
  for (auto& px : img.pixels()) px = to_byte(px + rng.normal(0.0, sigma));
}

void random_erase(Image& img, const PhotometricParams& p) {
  const double w = std::sqrt(p.erase_area / p.erase_aspect);
  const double h = std::sqrt(p.erase_area * p.erase_aspect);
  const double x0 = p.erase_x * (1.0 - w), y0 = p.erase_y * (1.0 - h);
  const PixelRect r = pixel_extent({x0, y0, std::min(1.0, x0 + w), std::min(1.0, y0 + h)}, img.size());
  Rng rng(p.seed);
  for (int y = r.y0; y < r.y1; ++y)
    for (int x = r.x0; x < r.x1; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
}

// Additive haze whose density grows toward the top of the frame (farther away).
void foggy(Image& img, int severity) {
  constexpr double haze = 200.0;
  for (int y = 0; y < img.height(); ++y) {
    const double depth = 1.0 - static_cast<double>(y) / img.height();
    const double alpha = std::min(0.85, 0.12 * severity * (0.5 + 0.5 * depth));
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = to_byte(img.at(x, y, c) * (1.0 - alpha) + haze * alpha);
  }
}

// Brightness lift plus sparse bright speckles.
void snow(Image& img, int severity, std::uint64_t seed) {
  Rng rng(seed);
  const double lift = 8.0 * severity;
  const double density = 0.01 * severity;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const bool flake = rng.bernoulli(density);
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = flake ? 250 : to_byte(img.at(x, y, c) + lift);
    }
}

}  // namespace

double nuisance_level(PhotometricKind kind, const PhotometricParams& params) {
  switch (kind) {
    case PhotometricKind::blur:
    case PhotometricKind::noise:
    case PhotometricKind::foggy:
    case PhotometricKind::snow:
      return 0.2 * params.severity;
    case PhotometricKind::color_jitter:
      return 0.5 * std::max({std::abs(params.brightness - 1.0), std::abs(params.contrast - 1.0),
                             std::abs(params.saturation - 1.0)});
    case PhotometricKind::random_erase:
      return 0.0;
  }
  return 0.0;
}

Scene photometric(const Scene& scene, PhotometricKind kind, const PhotometricParams& params) {
  if (params.severity < 1 || params.severity > 5) throw ConfigError("photometric severity must lie in [1, 5]");
  Scene out = scene;
  out.domain_shift = std::max(scene.domain_shift, nuisance_level(kind, params));
  if (!out.image.has_pixels()) return out;
  Image& img = out.image;
  switch (kind) {
    case PhotometricKind::color_jitter:
      color_jitter(img, params);
      break;
    case PhotometricKind::blur:
      blur(img, params.severity);
      break;
    case PhotometricKind::noise:
      gaussian_noise(img, params.severity, params.seed);
      break;
    case PhotometricKind::random_erase:
      random_erase(img, params);
      break;
    case PhotometricKind::foggy:
      foggy(img, params.severity);
      break;
    case PhotometricKind::snow:
      snow(img, params.severity, params.seed);
      break;
  }
  return out;
}

}  // namespace detadapt

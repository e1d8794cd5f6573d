#include <algorithm>
#include <array>
#include <cmath>

#include "detadapt/error.hpp"
#include "detadapt/random.hpp"
#include "detadapt/simulator.hpp"

namespace detadapt {

namespace {

constexpr std::uint64_t kSceneStream = 0x5ce0;
constexpr std::uint64_t kBankStream = 0xba2c;
constexpr int kPlacementAttempts = 50;

struct Shape {
  PixelRect rect;
  bool ellipse = false;
  int category = 0;
  int stripe_phase = 0;

  bool covers(int x, int y) const {
    if (!rect.contains(x, y)) return false;
    if (!ellipse) return true;
    const double rx = 0.5 * rect.width(), ry = 0.5 * rect.height();
    const double dx = (x + 0.5 - rect.x0 - rx) / rx, dy = (y + 0.5 - rect.y0 - ry) / ry;
    return dx * dx + dy * dy <= 1.0;
  }
};

std::array<std::uint8_t, 3> category_color(int category, int num_categories) {
  // Evenly spaced hues at full saturation.
  const double h = 6.0 * category / std::max(1, num_categories);
  const int sector = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  const auto hi = std::uint8_t{230}, lo = std::uint8_t{40};
  const auto up = static_cast<std::uint8_t>(lo + f * (hi - lo));
  const auto down = static_cast<std::uint8_t>(hi - f * (hi - lo));
  switch (sector) {
    case 0: return {hi, up, lo};
    case 1: return {down, hi, lo};
    case 2: return {lo, hi, up};
    case 3: return {lo, down, hi};
    case 4: return {up, lo, hi};
    default: return {hi, lo, down};
  }
}

void paint(Image& img, const Shape& s, int num_categories) {
  const auto color = category_color(s.category, num_categories);
  const int period = 3 + s.category % 4;  // stripe texture is a category signature
  for (int y = s.rect.y0; y < s.rect.y1; ++y)
    for (int x = s.rect.x0; x < s.rect.x1; ++x) {
      if (!s.covers(x, y)) continue;
      const bool stripe = ((x + y + s.stripe_phase) / period) % 2 == 0;
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = stripe ? color[c] : static_cast<std::uint8_t>(color[c] * 3 / 4);
    }
}

Shape sample_shape(const WorldConfig& cfg, Rng& rng) {
  const ImageSize s = cfg.image;
  const int w = std::max(2, static_cast<int>(std::lround(rng.uniform(cfg.size_min, cfg.size_max) * s.width)));
  const int h = std::max(2, static_cast<int>(std::lround(rng.uniform(cfg.size_min, cfg.size_max) * s.height)));
  const int x0 = static_cast<int>(rng.uniform_int(0, std::max(0, s.width - w)));
  const int y0 = static_cast<int>(rng.uniform_int(0, std::max(0, s.height - h)));
  Shape shape;
  shape.rect = {x0, y0, std::min(s.width, x0 + w), std::min(s.height, y0 + h)};
  shape.ellipse = rng.bernoulli(0.5);
  shape.category = static_cast<int>(rng.uniform_int(0, cfg.num_categories - 1));
  shape.stripe_phase = static_cast<int>(rng.uniform_int(0, 7));
  return shape;
}

Mask shape_mask(const Shape& s) {
  Mask m = Mask::empty(s.rect);
  for (int y = s.rect.y0; y < s.rect.y1; ++y)
    for (int x = s.rect.x0; x < s.rect.x1; ++x)
      if (s.covers(x, y)) m.set(x, y, true);
  return m;
}

void paint_background(Image& img, Rng& rng) {
  const int base = static_cast<int>(rng.uniform_int(60, 140));
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const int v = base + (40 * y) / img.height() + static_cast<int>(rng.uniform_int(-6, 6));
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(v + 6 * c, 0, 255));
    }
}

}  // namespace

void WorldConfig::validate() const {
  if (image.width < 8 || image.height < 8) throw ConfigError("world image must be at least 8x8");
  if (num_categories < 1) throw ConfigError("world needs at least one category");
  if (objects_min < 0 || objects_max < objects_min) throw ConfigError("world objects-per-image range is invalid");
  if (!(size_min > 0.0 && size_max <= 1.0 && size_min <= size_max))
    throw ConfigError("world object size range must lie in (0, 1]");
  if (!(shift >= 0.0)) throw ConfigError("world shift must be non-negative");
}

Scene generate_scene(const WorldConfig& cfg, std::uint64_t index) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, {kSceneStream, index}));
  Scene scene;
  scene.image = Image(cfg.image.width, cfg.image.height);
  paint_background(scene.image, rng);

  const auto count = rng.uniform_int(cfg.objects_min, cfg.objects_max);
  std::vector<Shape> shapes;
  std::vector<Mask> visible;
  std::vector<long> original;
  for (std::int64_t k = 0; k < count; ++k) {
    // Re-place an object that would hide more than 90% of an earlier one.
    for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
      const Shape candidate = sample_shape(cfg, rng);
      bool ok = true;
      for (std::size_t j = 0; j < shapes.size() && ok; ++j) {
        long left = 0;
        for (int y = visible[j].window.y0; y < visible[j].window.y1; ++y)
          for (int x = visible[j].window.x0; x < visible[j].window.x1; ++x)
            if (visible[j].test(x, y) && !candidate.covers(x, y)) ++left;
        ok = left >= kOcclusionKeepFraction * original[j];
      }
      if (!ok) continue;
      for (auto& m : visible)
        for (int y = m.window.y0; y < m.window.y1; ++y)
          for (int x = m.window.x0; x < m.window.x1; ++x)
            if (candidate.covers(x, y)) m.set(x, y, false);
      shapes.push_back(candidate);
      visible.push_back(shape_mask(candidate));
      original.push_back(visible.back().count());
      break;
    }
  }

  for (const Shape& s : shapes) paint(scene.image, s, cfg.num_categories);
  for (std::size_t i = 0; i < shapes.size(); ++i)
    scene.add({box_from_pixels(shapes[i].rect, cfg.image), shapes[i].category}, visible[i]);

  if (cfg.shift > 0.0) {
    PhotometricParams p;
    p.severity = std::clamp(static_cast<int>(std::lround(cfg.shift * 2.5)), 1, 5);
    p.seed = rng.next_u64();
    scene = photometric(scene, PhotometricKind::foggy, p);
    scene = photometric(scene, PhotometricKind::noise, p);
  }
  scene.domain_shift = cfg.shift;
  return scene;
}

InstanceBank build_instance_bank(const WorldConfig& cfg, std::size_t count) {
  cfg.validate();
  InstanceBank bank;
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(cfg.seed, {kBankStream, i}));
    Shape s = sample_shape(cfg, rng);
    const int w = s.rect.width(), h = s.rect.height();
    s.rect = {0, 0, w, h};
    Instance inst;
    inst.patch = Image(w, h);
    paint(inst.patch, s, cfg.num_categories);
    inst.mask = shape_mask(s);
    inst.category = s.category;
    bank.add(std::move(inst));
  }
  return bank;
}

void DetectorParams::validate() const {
  if (!(scale_bias > -0.5 && scale_bias < 2.0)) throw ConfigError("detector scale_bias must lie in (-0.5, 2)");
  if (!(noise >= 0.0)) throw ConfigError("detector noise must be non-negative");
  if (!(miss_rate >= 0.0 && miss_rate <= 1.0)) throw ConfigError("detector miss_rate must lie in [0, 1]");
  if (!(fp_rate >= 0.0)) throw ConfigError("detector fp_rate must be non-negative");
  if (!(score_slope > 0.0)) throw ConfigError("detector score_slope must be positive");
  if (!(fp_score_max > 0.02 && fp_score_max <= 1.0)) throw ConfigError("detector fp_score_max must lie in (0.02, 1]");
  if (num_categories < 1) throw ConfigError("detector num_categories must be positive");
}

double scale_factor(const DetectorParams& p, double shift) { return 1.0 + p.scale_bias * (1.0 + shift); }

ParamVector exact_correction(const DetectorParams& p, double shift) {
  const double g = scale_factor(p, shift);
  return ParamVector(kCorrectionDim, 1.0 / g - 1.0);
}

std::vector<Emission> emit(const DetectorParams& p, const Scene& scene, double shift, std::uint64_t stream) {
  Rng rng(stream);
  const double g = scale_factor(p, shift);
  const double sigma = p.noise * (1.0 + shift);
  const double miss = std::min(1.0, p.miss_rate * (1.0 + shift));
  std::vector<Emission> out;
  for (std::size_t i = 0; i < scene.boxes.size(); ++i) {
    // Draws happen unconditionally so a miss does not perturb later objects.
    const bool missed = rng.bernoulli(miss);
    const double zx = rng.normal(), zy = rng.normal(), zw = rng.normal(), zh = rng.normal();
    if (missed) continue;
    const BBox& t = scene.boxes[i].box;
    const double cx = t.center_x() + sigma * t.width() * zx;
    const double cy = t.center_y() + sigma * t.height() * zy;
    const double w = t.width() * g * std::exp(sigma * zw);
    const double h = t.height() * g * std::exp(sigma * zh);
    out.push_back({{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h}, scene.boxes[i].category,
                   static_cast<int>(i), 0.0});
  }

  if (p.fp_rate > 0.0) {
    const int n = rng.poisson(p.fp_rate * (1.0 + shift));
    for (int k = 0; k < n; ++k) {
      const double w = rng.uniform(0.1, 0.35), h = rng.uniform(0.1, 0.35);
      const double x = rng.uniform(0.0, 1.0 - w), y = rng.uniform(0.0, 1.0 - h);
      const int category = static_cast<int>(rng.uniform_int(0, p.num_categories - 1));
      out.push_back({{x, y, x + w, y + h}, category, -1, rng.uniform(0.02, p.fp_score_max)});
    }
  }
  return out;
}

std::optional<BBox> apply_correction(const BBox& raw, const ParamVector& c) {
  const double w = raw.width() * std::max(1e-6, 1.0 + c[0]);
  const double h = raw.height() * std::max(1e-6, 1.0 + c[1]);
  const double cx = raw.center_x(), cy = raw.center_y();
  return clip_box({cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h});
}

std::vector<Detection> finalize(std::span<const Emission> emissions, const ParamVector& c, const Scene& scene,
                                const DetectorParams& p) {
  std::vector<Detection> out;
  for (const Emission& e : emissions) {
    const auto box = apply_correction(e.raw, c);
    if (!box) continue;
    if (e.truth_index >= 0) {
      const double overlap = iou(*box, scene.boxes[e.truth_index].box);
      out.push_back({*box, e.category, std::pow(overlap, p.score_slope)});
    } else {
      out.push_back({*box, e.category, e.fp_score});
    }
  }
  return out;
}

OracleDetector::OracleDetector(DetectorParams params, ParamVector correction)
    : params_(params), correction_(std::move(correction)) {
  params_.validate();
  if (correction_.size() != kCorrectionDim) throw ConfigError("oracle correction must have dimension 2");
}

std::vector<Detection> OracleDetector::detect(const Scene& view, std::uint64_t stream) const {
  return oracle_detect(*this, view, view.domain_shift, stream);
}

std::vector<Detection> oracle_detect(const OracleDetector& detector, const Scene& scene, double shift,
                                     std::uint64_t stream) {
  const auto emissions = emit(detector.params(), scene, shift, stream);
  return finalize(emissions, detector.correction(), scene, detector.params());
}

}  // namespace detadapt

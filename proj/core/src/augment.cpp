#include "detadapt/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "detadapt/error.hpp"
#include "detadapt/random.hpp"

namespace detadapt {

namespace {

constexpr std::uint64_t kPlanStream = 0xa0a0;

void require_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string("augmentation probability ") + name +
                                                 " must lie in [0, 1]");
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::optional<Mask> resample_mask(const Mask& mask, ImageSize from, ImageSize to, const PixelRect& extent) {
  Mask out = Mask::empty(extent);
  for (int y = extent.y0; y < extent.y1; ++y) {
    const int sy = std::min(from.height - 1, static_cast<int>((y + 0.5) * from.height / to.height));
    for (int x = extent.x0; x < extent.x1; ++x) {
      const int sx = std::min(from.width - 1, static_cast<int>((x + 0.5) * from.width / to.width));
      if (mask.test(sx, sy)) out.set(x, y, true);
    }
  }
  if (out.count() == 0) return std::nullopt;
  return out;
}

Mask flip_mask(const Mask& mask, int width) {
  const PixelRect w = mask.window;
  Mask out = Mask::empty({width - w.x1, w.y0, width - w.x0, w.y1});
  for (int y = w.y0; y < w.y1; ++y)
    for (int x = w.x0; x < w.x1; ++x)
      if (mask.test(x, y)) out.set(width - 1 - x, y, true);
  return out;
}

Image flip_image(const Image& img) {
  if (!img.has_pixels()) return img;
  Image out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c) out.at(img.width() - 1 - x, y, c) = img.at(x, y, c);
  return out;
}

struct Rotation {
  double cos_t, sin_t, cx, cy;

  Rotation(double degrees, ImageSize s)
      : cos_t(std::cos(degrees * std::numbers::pi / 180.0)),
        sin_t(std::sin(degrees * std::numbers::pi / 180.0)),
        cx(0.5 * s.width),
        cy(0.5 * s.height) {}

  void forward(double x, double y, double& ox, double& oy) const {
    const double dx = x - cx, dy = y - cy;
    ox = cx + cos_t * dx - sin_t * dy;
    oy = cy + sin_t * dx + cos_t * dy;
  }
  void inverse(double x, double y, double& ox, double& oy) const {
    const double dx = x - cx, dy = y - cy;
    ox = cx + cos_t * dx + sin_t * dy;
    oy = cy - sin_t * dx + cos_t * dy;
  }
};

}  // namespace

AugConfig AugConfig::weak() {
  AugConfig cfg;
  cfg.p_copy_paste = 0.0;
  cfg.p_mixup = 0.0;
  cfg.p_blur_noise = 0.0;
  cfg.p_color_jitter = 0.0;
  cfg.p_random_erase = 0.0;
  cfg.p_weather = 0.0;
  cfg.p_rotate = 0.0;
  return cfg;
}

void AugConfig::validate() const {
  require_probability(p_resize, "p_resize");
  require_probability(p_copy_paste, "p_copy_paste");
  require_probability(p_mixup, "p_mixup");
  require_probability(p_blur_noise, "p_blur_noise");
  require_probability(p_color_jitter, "p_color_jitter");
  require_probability(p_random_erase, "p_random_erase");
  require_probability(p_weather, "p_weather");
  require_probability(p_hflip, "p_hflip");
  require_probability(p_rotate, "p_rotate");
  if (resize_min < 1 || resize_max < resize_min) throw ConfigError("resize range is invalid");
  if (reference_height < 1) throw ConfigError("reference_height must be positive");
  if (paste_min < 0 || paste_max < paste_min) throw ConfigError("copy-paste count range is invalid");
  if (!(mixup_lambda_min > 0.0 && mixup_lambda_max < 1.0 && mixup_lambda_min <= mixup_lambda_max))
    throw ConfigError("mixup lambda range must lie inside (0, 1)");
  if (!(jitter_strength >= 0.0 && jitter_strength < 1.0)) throw ConfigError("jitter_strength must lie in [0, 1)");
  if (severity_min < 1 || severity_max > 5 || severity_max < severity_min)
    throw ConfigError("severity range must lie in [1, 5]");
  if (!(erase_area_min > 0.0 && erase_area_max <= 1.0 && erase_area_min <= erase_area_max))
    throw ConfigError("random-erase area range is invalid");
  if (!(erase_aspect_min > 0.0 && erase_aspect_min <= erase_aspect_max))
    throw ConfigError("random-erase aspect range is invalid");
  // The normalized rectangle must fit in the unit square for every draw.
  if (erase_area_max / erase_aspect_min > 1.0 || erase_area_max * erase_aspect_max > 1.0)
    throw ConfigError("random-erase rectangle can exceed the image");
  if (!(rotate_max_degrees >= 0.0 && rotate_max_degrees <= 90.0))
    throw ConfigError("rotate_max_degrees must lie in [0, 90]");
}

bool AugPlan::has_mixup() const {
  return std::any_of(steps.begin(), steps.end(),
                     [](const AugStep& s) { return std::holds_alternative<MixupStep>(s); });
}

bool AugPlan::is_geometric_only() const {
  return std::none_of(steps.begin(), steps.end(), [](const AugStep& s) {
    return std::holds_alternative<MixupStep>(s) || std::holds_alternative<CopyPasteStep>(s);
  });
}

AugPlan sample_plan(const AugConfig& cfg, std::uint64_t sample_index) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, {kPlanStream, sample_index}));
  AugPlan plan;
  GateRecord& g = plan.gates;

  // Gates are drawn first and in a fixed order so that a plan's structure
  // does not depend on which parameters get sampled afterwards.
  g.resize = rng.bernoulli(cfg.p_resize);
  g.copy_paste = rng.bernoulli(cfg.p_copy_paste);
  const std::array<double, kChoiceGroupSize> choice_p{cfg.p_mixup, cfg.p_blur_noise, cfg.p_color_jitter,
                                                      cfg.p_random_erase, cfg.p_weather};
  for (std::size_t i = 0; i < kChoiceGroupSize; ++i) g.choice[i] = rng.bernoulli(choice_p[i]);
  g.hflip = rng.bernoulli(cfg.p_hflip);
  g.rotate = rng.bernoulli(cfg.p_rotate);

  std::vector<std::size_t> fired;
  for (std::size_t i = 0; i < kChoiceGroupSize; ++i)
    if (g.choice[i]) fired.push_back(i);
  if (!fired.empty()) {
    const auto pick = fired[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(fired.size()) - 1))];
    g.chosen = static_cast<ChoiceMember>(pick);
  }

  if (g.resize)
    plan.steps.emplace_back(ResizeStep{static_cast<int>(rng.uniform_int(cfg.resize_min, cfg.resize_max)),
                                       cfg.reference_height});
  if (g.copy_paste) {
    CopyPasteStep step;
    const auto n = rng.uniform_int(cfg.paste_min, cfg.paste_max);
    for (std::int64_t i = 0; i < n; ++i) {
      CopyPasteStep::Placement p;
      p.pick = rng.uniform();
      p.anchor_x = rng.uniform();
      p.anchor_y = rng.uniform();
      step.placements.push_back(p);
    }
    plan.steps.emplace_back(std::move(step));
  }
  if (g.chosen) {
    PhotometricParams params;
    params.seed = rng.next_u64();
    params.severity = static_cast<int>(rng.uniform_int(cfg.severity_min, cfg.severity_max));
    const bool alternate = rng.bernoulli(0.5);  // blur vs noise, foggy vs snow
    switch (*g.chosen) {
      case ChoiceMember::mixup:
        plan.steps.emplace_back(MixupStep{rng.uniform(cfg.mixup_lambda_min, cfg.mixup_lambda_max)});
        break;
      case ChoiceMember::blur_noise:
        plan.steps.emplace_back(PhotometricStep{alternate ? PhotometricKind::noise : PhotometricKind::blur, params});
        break;
      case ChoiceMember::color_jitter: {
        const double j = cfg.jitter_strength;
        params.brightness = rng.uniform(1.0 - j, 1.0 + j);
        params.contrast = rng.uniform(1.0 - j, 1.0 + j);
        params.saturation = rng.uniform(1.0 - j, 1.0 + j);
        plan.steps.emplace_back(PhotometricStep{PhotometricKind::color_jitter, params});
        break;
      }
      case ChoiceMember::random_erase:
        params.erase_area = rng.uniform(cfg.erase_area_min, cfg.erase_area_max);
        params.erase_aspect = rng.uniform(cfg.erase_aspect_min, cfg.erase_aspect_max);
        params.erase_x = rng.uniform();
        params.erase_y = rng.uniform();
        plan.steps.emplace_back(PhotometricStep{PhotometricKind::random_erase, params});
        break;
      case ChoiceMember::weather:
        plan.steps.emplace_back(PhotometricStep{alternate ? PhotometricKind::snow : PhotometricKind::foggy, params});
        break;
    }
  }
  if (g.hflip) plan.steps.emplace_back(HFlipStep{});
  if (g.rotate) plan.steps.emplace_back(RotateStep{rng.uniform(-cfg.rotate_max_degrees, cfg.rotate_max_degrees)});
  return plan;
}

void InstanceBank::add(Instance instance) {
  const PixelRect full{0, 0, instance.patch.width(), instance.patch.height()};
  if (instance.mask.window != full) throw DataError("instance mask must cover its patch exactly");
  if (instance.mask.count() == 0) throw DataError("instance mask is empty");
  instances_.push_back(std::move(instance));
}

Scene apply_geometry(const Scene& scene, const GeomTransform& t) {
  Scene out;
  out.domain_shift = scene.domain_shift;
  const ImageSize from = scene.image.size();
  const ImageSize to = t.apply(from);
  out.image = (to == from) ? scene.image : resize_nearest(scene.image, to);
  if (t.hflip) out.image = flip_image(out.image);

  for (std::size_t i = 0; i < scene.boxes.size(); ++i) {
    const LabeledBox moved{apply_transform(scene.boxes[i].box, t), scene.boxes[i].category};
    std::optional<Mask> mask;
    if (scene.masks[i]) {
      if (to == from) {
        mask = scene.masks[i];
      } else {
        mask = resample_mask(*scene.masks[i], from, to, pixel_extent(scene.boxes[i].box, to));
      }
      if (mask && t.hflip) mask = flip_mask(*mask, to.width);
    }
    out.add(moved, std::move(mask));
  }
  return out;
}

BBox rotate_box(const BBox& b, double degrees, ImageSize s) {
  const Rotation rot(degrees, s);
  double xs[4], ys[4];
  const double px[4] = {b.x1 * s.width, b.x2 * s.width, b.x2 * s.width, b.x1 * s.width};
  const double py[4] = {b.y1 * s.height, b.y1 * s.height, b.y2 * s.height, b.y2 * s.height};
  for (int k = 0; k < 4; ++k) rot.forward(px[k], py[k], xs[k], ys[k]);
  return {*std::min_element(xs, xs + 4) / s.width, *std::min_element(ys, ys + 4) / s.height,
          *std::max_element(xs, xs + 4) / s.width, *std::max_element(ys, ys + 4) / s.height};
}

Scene rotate_scene(const Scene& scene, double degrees) {
  const ImageSize s = scene.image.size();
  const Rotation rot(degrees, s);
  Scene out;
  out.domain_shift = scene.domain_shift;
  if (scene.image.has_pixels()) {
    out.image = Image(s.width, s.height);
    for (int y = 0; y < s.height; ++y)
      for (int x = 0; x < s.width; ++x) {
        double sx, sy;
        rot.inverse(x + 0.5, y + 0.5, sx, sy);
        const int ix = static_cast<int>(std::floor(sx)), iy = static_cast<int>(std::floor(sy));
        if (ix < 0 || iy < 0 || ix >= s.width || iy >= s.height) continue;
        for (int c = 0; c < 3; ++c) out.image.at(x, y, c) = scene.image.at(ix, iy, c);
      }
  } else {
    out.image = scene.image;
  }

  for (std::size_t i = 0; i < scene.boxes.size(); ++i) {
    const auto clipped = clip_box(rotate_box(scene.boxes[i].box, degrees, s));
    if (!clipped) continue;
    std::optional<Mask> mask;
    if (scene.masks[i]) {
      const PixelRect extent = pixel_extent(*clipped, s);
      Mask m = Mask::empty(extent);
      for (int y = extent.y0; y < extent.y1; ++y)
        for (int x = extent.x0; x < extent.x1; ++x) {
          double sx, sy;
          rot.inverse(x + 0.5, y + 0.5, sx, sy);
          if (scene.masks[i]->test(static_cast<int>(std::floor(sx)), static_cast<int>(std::floor(sy))))
            m.set(x, y, true);
        }
      if (m.count() > 0) mask = std::move(m);
    }
    out.add({*clipped, scene.boxes[i].category}, std::move(mask));
  }
  return out;
}

Scene copy_paste(const Scene& scene, std::span<const Instance* const> instances,
                 std::span<const PixelPoint> positions) {
  if (instances.size() != positions.size()) throw ConfigError("copy_paste needs one position per instance");
  if (instances.empty()) return scene;

  const int W = scene.image.width(), H = scene.image.height();
  // owner[p] = index of the topmost paste covering pixel p, -1 for none
  std::vector<int> owner(static_cast<std::size_t>(W) * H, -1);
  auto owner_at = [&](int x, int y) -> int& { return owner[static_cast<std::size_t>(y) * W + x]; };

  Scene out = scene;
  std::vector<Mask> placed;
  for (std::size_t k = 0; k < instances.size(); ++k) {
    const Instance& inst = *instances[k];
    const PixelPoint at = positions[k];
    const PixelRect window{std::max(0, at.x), std::max(0, at.y), std::min(W, at.x + inst.patch.width()),
                           std::min(H, at.y + inst.patch.height())};
    Mask m = Mask::empty(window.width() > 0 && window.height() > 0 ? window : PixelRect{});
    for (int y = window.y0; y < window.y1; ++y)
      for (int x = window.x0; x < window.x1; ++x) {
        if (!inst.mask.test(x - at.x, y - at.y)) continue;
        m.set(x, y, true);
        owner_at(x, y) = static_cast<int>(k);
        if (out.image.has_pixels())
          for (int c = 0; c < 3; ++c) out.image.at(x, y, c) = inst.patch.at(x - at.x, y - at.y, c);
      }
    placed.push_back(std::move(m));
  }

  // Visibility of the objects that were present before pasting.
  Scene result;
  result.image = std::move(out.image);
  result.domain_shift = scene.domain_shift;
  for (std::size_t i = 0; i < scene.boxes.size(); ++i) {
    const PixelRect extent = pixel_extent(scene.boxes[i].box, scene.image.size());
    long original = 0, visible = 0;
    std::optional<Mask> mask = scene.masks[i];
    for (int y = extent.y0; y < extent.y1; ++y)
      for (int x = extent.x0; x < extent.x1; ++x) {
        if (mask && !mask->test(x, y)) continue;
        ++original;
        if (owner_at(x, y) < 0) {
          ++visible;
        } else if (mask) {
          mask->set(x, y, false);
        }
      }
    if (original == 0 || visible < kOcclusionKeepFraction * original) continue;
    result.add(scene.boxes[i], std::move(mask));
  }

  for (std::size_t k = 0; k < placed.size(); ++k) {
    const auto bounds = placed[k].bounds();
    if (!bounds) continue;
    Mask& m = placed[k];
    const long original = m.count();
    for (int y = m.window.y0; y < m.window.y1; ++y)
      for (int x = m.window.x0; x < m.window.x1; ++x)
        if (m.test(x, y) && owner_at(x, y) != static_cast<int>(k)) m.set(x, y, false);
    if (m.count() < kOcclusionKeepFraction * original) continue;
    result.add({box_from_pixels(*bounds, scene.image.size()), instances[k]->category}, std::move(m));
  }
  return result;
}

Scene mixup(const Scene& a, const Scene& b, double lambda) {
  if (a.image.size() != b.image.size()) throw DataError("mixup requires images of equal size");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("mixup lambda must lie in [0, 1]");
  Scene out = a;
  if (a.image.has_pixels() && b.image.has_pixels()) {
    auto& dst = out.image.pixels();
    const auto& src = b.image.pixels();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      const double v = lambda * dst[i] + (1.0 - lambda) * src[i];
      dst[i] = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
    }
  }
  for (std::size_t i = 0; i < b.boxes.size(); ++i) out.add(b.boxes[i], b.masks[i]);
  out.domain_shift = std::max(a.domain_shift, b.domain_shift);
  return out;
}

namespace {

Scene apply_plan_impl(Scene current, const AugPlan& plan, const InstanceBank& bank, const Scene* partner) {
  for (const AugStep& step : plan.steps) {
    current = std::visit(
        Overloaded{
            [&](const ResizeStep& s) { return apply_geometry(current, s.transform()); },
            [&](const CopyPasteStep& s) {
              if (bank.empty() || s.placements.empty()) return current;
              std::vector<const Instance*> picks;
              std::vector<PixelPoint> points;
              const int W = current.image.width(), H = current.image.height();
              for (const auto& p : s.placements) {
                const auto idx = std::min(bank.size() - 1, static_cast<std::size_t>(p.pick * bank.size()));
                const Instance& inst = bank[idx];
                picks.push_back(&inst);
                points.push_back({static_cast<int>(std::lround(p.anchor_x * std::max(0, W - inst.patch.width()))),
                                  static_cast<int>(std::lround(p.anchor_y * std::max(0, H - inst.patch.height())))});
              }
              return copy_paste(current, picks, points);
            },
            [&](const MixupStep& s) {
              if (partner == nullptr) throw ConfigError("augmentation plan mixes up but no partner scene was given");
              const GeomTransform fit{false, current.image.height(), partner->image.height()};
              Scene other = apply_geometry(*partner, fit);
              if (other.image.size() != current.image.size()) {
                // aspect drift from integer rounding: resample to the exact size
                Scene exact = other;
                exact.image = resize_nearest(other.image, current.image.size());
                for (std::size_t i = 0; i < exact.masks.size(); ++i)
                  if (other.masks[i])
                    exact.masks[i] = resample_mask(*other.masks[i], other.image.size(), current.image.size(),
                                                   pixel_extent(other.boxes[i].box, current.image.size()));
                other = std::move(exact);
              }
              return mixup(current, other, s.lambda);
            },
            [&](const PhotometricStep& s) { return photometric(current, s.kind, s.params); },
            [&](const HFlipStep&) { return apply_geometry(current, GeomTransform{true, 1, 1}); },
            [&](const RotateStep& s) { return rotate_scene(current, s.degrees); },
        },
        step);
  }
  return current;
}

Scene as_shell(const Scene& scene) {
  Scene s = scene;
  s.image = Image::shell(scene.image.width(), scene.image.height());
  return s;
}

}  // namespace

Scene apply_plan(const Scene& scene, const AugPlan& plan, const InstanceBank& bank, const Scene* partner) {
  if (plan.has_mixup() && partner == nullptr)
    throw ConfigError("augmentation plan mixes up but no partner scene was given");
  return apply_plan_impl(scene, plan, bank, partner);
}

Scene apply_plan_labels(const Scene& scene, const AugPlan& plan, const InstanceBank& bank, const Scene* partner) {
  if (plan.has_mixup() && partner == nullptr)
    throw ConfigError("augmentation plan mixes up but no partner scene was given");
  if (partner == nullptr) return apply_plan_impl(as_shell(scene), plan, bank, nullptr);
  const Scene partner_shell = as_shell(*partner);
  return apply_plan_impl(as_shell(scene), plan, bank, &partner_shell);
}

std::vector<LabeledBox> transform_labels(const AugPlan& plan, std::span<const LabeledBox> boxes, ImageSize size) {
  if (!plan.is_geometric_only()) throw ConfigError("transform_labels cannot follow copy-paste or mixup steps");
  std::vector<LabeledBox> out(boxes.begin(), boxes.end());
  for (const AugStep& step : plan.steps) {
    if (const auto* r = std::get_if<ResizeStep>(&step)) {
      size = r->transform().apply(size);
    } else if (std::holds_alternative<HFlipStep>(step)) {
      for (LabeledBox& b : out) b.box = apply_transform(b.box, GeomTransform{true, 1, 1});
    } else if (const auto* rot = std::get_if<RotateStep>(&step)) {
      std::vector<LabeledBox> kept;
      for (const LabeledBox& b : out)
        if (const auto c = clip_box(rotate_box(b.box, rot->degrees, size))) kept.push_back({*c, b.category});
      out = std::move(kept);
    }
  }
  return out;
}

}  // namespace detadapt

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "detadapt/geometry.hpp"
#include "detadapt/image.hpp"

namespace detadapt {

// Firing probability of each step of the strong pipeline plus the
// parameter ranges each op samples from. Defaults are the strong pipeline.
struct AugConfig {
  double p_resize = 1.0;
  double p_copy_paste = 0.3;
  // random-choice group: each member has its own gate, at most one is applied
  double p_mixup = 0.3;
  double p_blur_noise = 0.3;
  double p_color_jitter = 0.3;
  double p_random_erase = 0.3;
  double p_weather = 0.3;  // foggy or snow
  double p_hflip = 0.5;
  double p_rotate = 0.0;  // outside the strong pipeline; opt-in

  int resize_min = 480;
  int resize_max = 800;
  int reference_height = kReferenceHeight;

  int paste_min = 1;
  int paste_max = 2;
  double mixup_lambda_min = 0.35;
  double mixup_lambda_max = 0.65;
  double jitter_strength = 0.4;  // factors drawn from [1 - j, 1 + j]
  int severity_min = 1;
  int severity_max = 5;
  double erase_area_min = 0.02;
  double erase_area_max = 0.2;
  double erase_aspect_min = 0.3;
  double erase_aspect_max = 3.3;
  double rotate_max_degrees = 10.0;

  std::uint64_t seed = 0;

  static AugConfig strong() { return {}; }
  // Teacher-side augmentation: multi-scale resize and horizontal flip only.
  static AugConfig weak();
  void validate() const;
};

inline constexpr std::size_t kChoiceGroupSize = 5;
enum class ChoiceMember { mixup, blur_noise, color_jitter, random_erase, weather };

enum class PhotometricKind { color_jitter, blur, noise, random_erase, foggy, snow };

struct PhotometricParams {
  int severity = 1;  // blur, noise, foggy, snow
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
  // random erase rectangle in normalized units: width sqrt(area/aspect),
  // height sqrt(area*aspect), top-left at (x, y) scaled into the free range
  double erase_area = 0.1;
  double erase_aspect = 1.0;
  double erase_x = 0.0;
  double erase_y = 0.0;
  std::uint64_t seed = 0;  // noise, erase fill, snow speckles
};

struct ResizeStep {
  int height = kReferenceHeight;
  int reference_height = kReferenceHeight;

  GeomTransform transform() const { return {false, height, reference_height}; }
};
struct CopyPasteStep {
  struct Placement {
    double pick = 0.0;    // bank index = floor(pick * bank size)
    double anchor_x = 0;  // top-left, as a fraction of the free range
    double anchor_y = 0;
  };
  std::vector<Placement> placements;
};
struct MixupStep {
  double lambda = 0.5;
};
struct PhotometricStep {
  PhotometricKind kind = PhotometricKind::color_jitter;
  PhotometricParams params;
};
struct HFlipStep {};
struct RotateStep {
  double degrees = 0.0;
};

using AugStep = std::variant<ResizeStep, CopyPasteStep, MixupStep, PhotometricStep, HFlipStep, RotateStep>;

// Which steps fired while sampling, kept for auditing firing rates.
struct GateRecord {
  bool resize = false;
  bool copy_paste = false;
  std::array<bool, kChoiceGroupSize> choice{};
  std::optional<ChoiceMember> chosen;
  bool hflip = false;
  bool rotate = false;
};

struct AugPlan {
  std::vector<AugStep> steps;
  GateRecord gates;

  bool has_mixup() const;
  bool is_geometric_only() const;  // resize, hflip, rotate and photometric steps only
};

// Fully determined by (cfg, cfg.seed, sample_index).
AugPlan sample_plan(const AugConfig& cfg, std::uint64_t sample_index);

struct Instance {
  Image patch;
  Mask mask;  // window anchored at (0, 0), same size as patch
  int category = 0;
};

class InstanceBank {
 public:
  // Throws DataError when the mask is empty or does not match the patch.
  void add(Instance instance);
  std::size_t size() const { return instances_.size(); }
  bool empty() const { return instances_.empty(); }
  const Instance& operator[](std::size_t i) const { return instances_[i]; }

 private:
  std::vector<Instance> instances_;
};

struct PixelPoint {
  int x = 0;
  int y = 0;
};

// Pastes instances (later over earlier) with their top-left at the given
// points, clipping at the image border. Each pasted instance adds a box equal
// to its mask's tight rectangle; any object left with under
// kOcclusionKeepFraction of its original pixels visible is dropped.
Scene copy_paste(const Scene& scene, std::span<const Instance* const> instances,
                 std::span<const PixelPoint> positions);
inline constexpr double kOcclusionKeepFraction = 0.1;

// Pixelwise lambda * a + (1 - lambda) * b rounded half up; labels are the
// union of both scenes. Throws DataError when the sizes differ.
Scene mixup(const Scene& a, const Scene& b, double lambda);

// Pixel-only corruption. Boxes and masks are left untouched.
Scene photometric(const Scene& scene, PhotometricKind kind, const PhotometricParams& params);

// Nuisance level a photometric op imposes; an augmented scene's domain_shift
// is the max of its own and this.
double nuisance_level(PhotometricKind kind, const PhotometricParams& params);

// Resamples the scene to t.apply(size) and mirrors it when t.hflip is set.
Scene apply_geometry(const Scene& scene, const GeomTransform& t);
Scene rotate_scene(const Scene& scene, double degrees);
BBox rotate_box(const BBox& b, double degrees, ImageSize s);  // AABB of rotated corners, unclipped

// Throws ConfigError when the plan mixes up but no partner is given.
Scene apply_plan(const Scene& scene, const AugPlan& plan, const InstanceBank& bank,
                 const Scene* partner = nullptr);

// Same label output as apply_plan, without rendering pixels.
Scene apply_plan_labels(const Scene& scene, const AugPlan& plan, const InstanceBank& bank,
                        const Scene* partner = nullptr);

// Maps boxes through the geometric steps of a plan. Throws ConfigError for
// plans containing copy-paste or mixup, which add labels rather than move them.
std::vector<LabeledBox> transform_labels(const AugPlan& plan, std::span<const LabeledBox> boxes,
                                         ImageSize size);

}  // namespace detadapt

#include <algorithm>
#include <cmath>
#include <variant>

#include "detadapt/error.hpp"
#include "detadapt/random.hpp"
#include "detadapt/simulator.hpp"

namespace detadapt {

namespace {

constexpr std::uint64_t kStudentPlanStream = 0x57d0;
constexpr std::uint64_t kTeacherPlanStream = 0x7eac;
constexpr std::uint64_t kStudentEmitStream = 0x57e1;
constexpr std::uint64_t kTeacherEmitStream = 0x7ee1;

// Sums of log(target / raw) per axis over matched pairs.
struct LogRatioSums {
  double w = 0.0;
  double h = 0.0;
  int pairs = 0;

  void add(const LogRatioSums& o) {
    w += o.w;
    h += o.h;
    pairs += o.pairs;
  }
  ParamVector estimate() const {
    return ParamVector{std::exp(w / pairs) - 1.0, std::exp(h / pairs) - 1.0};
  }
};

LogRatioSums collect_pairs(std::span<const Emission> emissions, const ParamVector& current,
                           std::span<const LabeledBox> targets, double match_iou) {
  struct Candidate {
    double overlap;
    std::size_t e, t;
  };
  std::vector<Candidate> candidates;
  for (std::size_t e = 0; e < emissions.size(); ++e) {
    const auto corrected = apply_correction(emissions[e].raw, current);
    if (!corrected) continue;
    for (std::size_t t = 0; t < targets.size(); ++t) {
      if (targets[t].category != emissions[e].category) continue;
      const double o = iou(*corrected, targets[t].box);
      if (o >= match_iou) candidates.push_back({o, e, t});
    }
  }
  // Highest overlap first; index order breaks ties so the pairing is deterministic.
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.overlap > b.overlap; });
  std::vector<bool> used_e(emissions.size()), used_t(targets.size());
  LogRatioSums sums;
  for (const Candidate& c : candidates) {
    if (used_e[c.e] || used_t[c.t]) continue;
    used_e[c.e] = used_t[c.t] = true;
    const BBox& raw = emissions[c.e].raw;
    const BBox& target = targets[c.t].box;
    sums.w += std::log(target.width() / raw.width());
    sums.h += std::log(target.height() / raw.height());
    ++sums.pairs;
  }
  return sums;
}

// Composite geometry of a plan made of resize, flip and photometric steps.
GeomTransform plan_geometry(const AugPlan& plan, int reference_height) {
  GeomTransform t{false, reference_height, reference_height};
  for (const AugStep& step : plan.steps) {
    if (const auto* r = std::get_if<ResizeStep>(&step)) {
      t.target_height = r->height;
      t.source_height = r->reference_height;
    } else if (std::holds_alternative<HFlipStep>(step)) {
      t.hflip = !t.hflip;
    } else if (!std::holds_alternative<PhotometricStep>(step)) {
      throw ConfigError("teacher augmentation may only resize, flip and apply photometric ops");
    }
  }
  return t;
}

std::vector<LabeledBox> as_labels(std::span<const Detection> dets) {
  std::vector<LabeledBox> out;
  out.reserve(dets.size());
  for (const Detection& d : dets) out.push_back({d.box, d.category});
  return out;
}

Scene label_scene(const Scene& scene, std::vector<LabeledBox> labels) {
  Scene s;
  s.image = Image::shell(scene.image.width(), scene.image.height());
  s.domain_shift = scene.domain_shift;
  for (const LabeledBox& b : labels) s.add(b);
  return s;
}

std::optional<std::vector<LabeledBox>> teacher_labels(const SelfTrainState& state, const TrainingSample& sample,
                                                      const StepSettings& settings, const DetectorParams& params,
                                                      const InstanceBank& bank, std::uint64_t seed,
                                                      std::uint64_t step, std::size_t k, int* count) {
  AugConfig aug = settings.teacher_aug;
  aug.seed = derive_seed(seed, {kTeacherPlanStream, step});
  const AugPlan plan = sample_plan(aug, k);
  const GeomTransform geometry = plan_geometry(plan, aug.reference_height);
  const Scene view = apply_plan(*sample.scene, plan, bank);

  const OracleDetector teacher(params, state.teacher.teacher);
  const auto views = tta_expand(view, settings.teacher_views, teacher, derive_seed(seed, {kTeacherEmitStream, step, k}));
  const auto merged = tta_merge(views, settings.fusion);
  const auto original_frame = apply_transform(merged, invert_transform(geometry));
  const auto pseudo = generate_pseudo_labels(original_frame, sample.prior, settings.pseudo);
  *count = static_cast<int>(pseudo.size());
  if (pseudo.empty()) return std::nullopt;
  return as_labels(pseudo);
}

}  // namespace

std::optional<CorrectionFit> fit_correction(std::span<const Emission> emissions, const ParamVector& current,
                                            std::span<const LabeledBox> targets, double match_iou) {
  if (current.size() != kCorrectionDim) throw ConfigError("correction must have dimension 2");
  const LogRatioSums sums = collect_pairs(emissions, current, targets, match_iou);
  if (sums.pairs == 0) return std::nullopt;
  return CorrectionFit{sums.estimate(), sums.pairs};
}

ParamVector train_student(const SelfTrainState& state, std::span<const TrainingSample> batch,
                          const StepSettings& settings, const DetectorParams& params, const InstanceBank& bank,
                          std::uint64_t seed, std::uint64_t step, StepStats* stats) {
  if (state.student.size() != kCorrectionDim) throw ConfigError("student must have dimension 2");
  if (!(settings.learning_rate > 0.0 && settings.learning_rate <= 1.0))
    throw ConfigError("learning rate must lie in (0, 1]");
  StepStats local;

  // Targets for every sample first, so mixup partners can carry theirs.
  std::vector<std::optional<Scene>> labels(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const TrainingSample& sample = batch[k];
    if (sample.scene == nullptr) throw ConfigError("training sample without a scene");
    if (sample.ground_truth) {
      labels[k] = label_scene(*sample.scene, sample.scene->boxes);
      continue;
    }
    int count = 0;
    auto pseudo = teacher_labels(state, sample, settings, params, bank, seed, step, k, &count);
    local.pseudo_labels += count;
    if (pseudo) labels[k] = label_scene(*sample.scene, std::move(*pseudo));
  }

  AugConfig aug = settings.student_aug;
  aug.seed = derive_seed(seed, {kStudentPlanStream, step});
  LogRatioSums sums;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    if (!labels[k]) {
      ++local.samples_skipped;
      continue;
    }
    AugPlan plan = sample_plan(aug, k);
    // The partner is the next sample in the batch that has targets.
    std::size_t partner = k;
    for (std::size_t j = 1; j < batch.size() && partner == k; ++j)
      if (labels[(k + j) % batch.size()]) partner = (k + j) % batch.size();
    if (plan.has_mixup() && partner == k)
      std::erase_if(plan.steps, [](const AugStep& s) { return std::holds_alternative<MixupStep>(s); });
    const bool mix = plan.has_mixup();

    const Scene view = apply_plan(*batch[k].scene, plan, bank, mix ? batch[partner].scene : nullptr);
    const Scene target = batch[k].ground_truth
                             ? view
                             : apply_plan_labels(*labels[k], plan, bank, mix ? &*labels[partner] : nullptr);
    const auto emissions = emit(params, view, view.domain_shift, derive_seed(seed, {kStudentEmitStream, step, k}));
    sums.add(collect_pairs(emissions, state.student, target.boxes, settings.match_iou));
    ++local.samples_used;
  }

  local.pairs = sums.pairs;
  ParamVector next = state.student;
  if (sums.pairs > 0) {
    const ParamVector estimate = sums.estimate();
    for (std::size_t i = 0; i < kCorrectionDim; ++i)
      next.set(i, state.student[i] + settings.learning_rate * (estimate[i] - state.student[i]));
    local.student_updated = true;
  }
  if (stats) *stats = local;
  return next;
}

AugConfig SelfTrainConfig::test_time_strong() {
  AugConfig cfg = AugConfig::strong();
  cfg.p_mixup = 0.0;
  cfg.p_copy_paste = 0.0;
  return cfg;
}

void SelfTrainConfig::validate() const {
  if (iterations < 0) throw ConfigError("self-training iterations must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("self-training momentum must lie in [0, 1)");
  if (batch_size < 1) throw ConfigError("self-training batch size must be positive");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw ConfigError("self-training learning rate must lie in (0, 1]");
  if (!(match_iou > 0.0 && match_iou <= 1.0)) throw ConfigError("self-training match IoU must lie in (0, 1]");
  pseudo.validate();
  weak.validate();
  strong.validate();
  teacher_views.validate();
  fusion.validate();
}

SelfTrainState self_train_step(const SelfTrainState& state, std::span<const Scene* const> batch,
                               const SelfTrainConfig& cfg, const DetectorParams& params, const InstanceBank& bank,
                               std::uint64_t seed, std::uint64_t step, StepStats* stats) {
  std::vector<TrainingSample> samples;
  samples.reserve(batch.size());
  for (const Scene* s : batch) samples.push_back({s, false, nullptr});
  StepSettings settings;
  settings.student_aug = cfg.strong;
  settings.teacher_aug = cfg.weak;
  settings.teacher_views = cfg.teacher_views;
  settings.fusion = cfg.fusion;
  settings.pseudo = cfg.pseudo;
  settings.learning_rate = cfg.learning_rate;
  settings.match_iou = cfg.match_iou;

  SelfTrainState next;
  next.student = train_student(state, samples, settings, params, bank, seed, step, stats);
  next.teacher = ema_update(state.teacher, next.student);
  return next;
}

}  // namespace detadapt

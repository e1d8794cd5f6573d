#pragma once

// Desk-scale stand-in for the detector and datasets.
//
// The detector is not a network. It is a geometric error channel with a
// learnable correction: every true object is emitted with its size inflated
// by g = 1 + b * (1 + s) (b = scale bias, s = domain shift of the image) plus
// log-normal size noise and Gaussian centre noise of scale sigma * (1 + s).
// The learnable "student parameters" are a per-axis size correction c, and
// training is a log-space least-squares fit of c from (raw emission, target
// box) pairs. Scores are IoU-aware (IoU^slope against the true box), which is
// what lets confident pseudo-labels carry information the student lacks.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "detadapt/augment.hpp"
#include "detadapt/ema.hpp"
#include "detadapt/eval.hpp"
#include "detadapt/fusion.hpp"
#include "detadapt/image.hpp"
#include "detadapt/pipeline.hpp"
#include "detadapt/pseudo_label.hpp"

namespace detadapt {

struct WorldConfig {
  ImageSize image{160, 96};
  int num_categories = 10;
  int objects_min = 1;
  int objects_max = 5;
  double size_min = 0.12;  // object side as a fraction of the image side
  double size_max = 0.35;
  std::uint64_t seed = 0;
  double shift = 0.0;  // nuisance severity rendered into the images

  void validate() const;
};

// Deterministic in (cfg.seed, index). Objects are filled rectangles or
// ellipses with per-category colour and stripe texture; masks are exact.
Scene generate_scene(const WorldConfig& cfg, std::uint64_t index);

// Isolated object cut-outs for copy-paste, from a dedicated seed stream.
InstanceBank build_instance_bank(const WorldConfig& cfg, std::size_t count);

struct DetectorParams {
  double scale_bias = 0.1;
  double noise = 0.02;
  double miss_rate = 0.0;      // per object, scaled by (1 + s), capped at 1
  double fp_rate = 0.0;        // expected false positives per image, scaled by (1 + s)
  double score_slope = 3.0;    // score = IoU^slope
  double fp_score_max = 0.6;   // false positives score uniformly in [0.02, fp_score_max)
  int num_categories = 10;     // false positives draw their category from [0, num_categories)

  void validate() const;
};

inline constexpr std::size_t kCorrectionDim = 2;  // width, height

struct Emission {
  BBox raw;              // uncorrected, unclipped
  int category = 0;
  int truth_index = -1;  // -1 for a false positive
  double fp_score = 0.0;
};

double scale_factor(const DetectorParams& p, double shift);
// The correction that cancels the scale bias at the given shift.
ParamVector exact_correction(const DetectorParams& p, double shift);

std::vector<Emission> emit(const DetectorParams& p, const Scene& scene, double shift, std::uint64_t stream);
std::optional<BBox> apply_correction(const BBox& raw, const ParamVector& c);
std::vector<Detection> finalize(std::span<const Emission> emissions, const ParamVector& c, const Scene& scene,
                                const DetectorParams& p);

class OracleDetector : public Detector {
 public:
  explicit OracleDetector(DetectorParams params, ParamVector correction = ParamVector(kCorrectionDim));

  // Uses the view's own domain_shift.
  std::vector<Detection> detect(const Scene& view, std::uint64_t stream) const override;

  const DetectorParams& params() const { return params_; }
  const ParamVector& correction() const { return correction_; }

 private:
  DetectorParams params_;
  ParamVector correction_;
};

std::vector<Detection> oracle_detect(const OracleDetector& detector, const Scene& scene, double shift,
                                     std::uint64_t stream);

// Log-space least squares for the size correction from emissions matched to
// targets (same category, IoU of the currently corrected box >= match_iou).
// Returns nullopt when nothing matched.
struct CorrectionFit {
  ParamVector estimate;
  int pairs = 0;
};
std::optional<CorrectionFit> fit_correction(std::span<const Emission> emissions, const ParamVector& current,
                                            std::span<const LabeledBox> targets, double match_iou);

struct SelfTrainConfig {
  int iterations = 200;
  double momentum = 0.999;
  PseudoLabelConfig pseudo = PseudoLabelConfig::test_time();
  AugConfig weak = AugConfig::weak();
  AugConfig strong = test_time_strong();
  TtaSpec teacher_views = TtaSpec::identity();
  FusionConfig fusion;
  int batch_size = 8;
  double learning_rate = 1.0;
  double match_iou = 0.3;

  // Strong pipeline without mixup and copy-paste, which are not used at test time.
  static AugConfig test_time_strong();
  void validate() const;
};

struct SelfTrainState {
  ParamVector student;
  EmaState teacher;

  static SelfTrainState from_student(const ParamVector& student, double momentum) {
    return {student, EmaState::from_student(student, momentum)};
  }
};

// One training sample: a scene supervised either by its own boxes or by
// teacher pseudo-labels (optionally restricted by an image-level prior).
struct TrainingSample {
  const Scene* scene = nullptr;
  bool ground_truth = false;
  const ClassPrior* prior = nullptr;
};

struct StepStats {
  int samples_used = 0;
  int samples_skipped = 0;  // no pseudo-labels survived filtering
  int pseudo_labels = 0;
  int pairs = 0;
  bool student_updated = false;
};

struct StepSettings {
  AugConfig student_aug;
  AugConfig teacher_aug;
  TtaSpec teacher_views = TtaSpec::identity();
  FusionConfig fusion;
  PseudoLabelConfig pseudo;
  double learning_rate = 1.0;
  double match_iou = 0.3;
};

// Student update from a batch. Pseudo-labels come from the EMA teacher on
// weakly augmented views; the student is fitted on strongly augmented views.
// Returns the new student; the teacher is not touched.
ParamVector train_student(const SelfTrainState& state, std::span<const TrainingSample> batch,
                          const StepSettings& settings, const DetectorParams& params, const InstanceBank& bank,
                          std::uint64_t seed, std::uint64_t step, StepStats* stats = nullptr);

// Test-time self-training step: teacher pseudo-labels on weak views (no class
// prior), one student fit on strong views, then teacher <- EMA(teacher, student).
// A batch without pseudo-labels leaves the student unchanged but still
// advances the teacher.
SelfTrainState self_train_step(const SelfTrainState& state, std::span<const Scene* const> batch,
                               const SelfTrainConfig& cfg, const DetectorParams& params, const InstanceBank& bank,
                               std::uint64_t seed, std::uint64_t step, StepStats* stats = nullptr);

struct StageSet {
  bool s1_weak = false;  // stage 1 with weak augmentation only
  bool s1 = false;
  bool s2 = false;
  bool s3 = false;

  static StageSet parse(std::string_view list);  // e.g. "S1*,S1,S2,S3"
  std::string label() const;
  // Throws ConfigError unless exactly one stage-1 variant is present, S2
  // builds on stage 1 and S3 builds on S2.
  void validate() const;
  friend bool operator==(const StageSet&, const StageSet&) = default;
};

struct SimulationConfig {
  std::uint64_t seed = 0;
  WorldConfig world;
  DetectorParams detector;
  double target_shift = 1.0;

  int source_scenes = 64;
  int aux_scenes = 64;
  int target_scenes = 64;
  int bank_size = 32;
  double aux_shift_min = 0.5;
  double aux_shift_max = 1.5;

  int stage1_iterations = 30;
  int stage2_iterations = 60;
  int batch_size = 16;
  double learning_rate = 0.5;
  double stage2_momentum = 0.9;
  double match_iou = 0.3;
  AugConfig strong = AugConfig::strong();
  AugConfig weak = AugConfig::weak();
  PseudoLabelConfig stage2_pseudo = PseudoLabelConfig::weakly_supervised();
  SelfTrainConfig self_train;

  TtaSpec tta = TtaSpec::multi_scale_flip();
  FusionConfig fusion;
  EvalOptions eval;

  void validate() const;
};

struct AblationRow {
  StageSet stages;
  bool tta = false;
  double map50 = 0.0;
  ParamVector correction;

  std::string label() const;
};

struct TrainingLogEntry {
  int iteration = 0;
  double map50 = 0.0;
  double distance = 0.0;  // |teacher - exact target-domain correction|
  ParamVector teacher;
};

// Owns the synthetic pools and memoizes stage results so that an ablation
// ladder shares work. Every stage draws from its own seed stream, so a row's
// value does not depend on which other rows were computed.
class Simulation {
 public:
  explicit Simulation(SimulationConfig cfg);

  const SimulationConfig& config() const { return cfg_; }
  const std::vector<Scene>& source_pool() const { return source_; }
  const std::vector<Scene>& aux_pool() const { return aux_; }
  const std::vector<ClassPrior>& aux_priors() const { return priors_; }
  const std::vector<Scene>& target_pool() const { return target_; }
  const InstanceBank& bank() const { return bank_; }

  ParamVector correction_for(const StageSet& stages);
  AblationRow run(const StageSet& stages, bool tta);

  // Detections of a detector with correction c over the target pool.
  std::vector<ImageDetection> detect_target(const ParamVector& c, bool tta, std::uint64_t stream_tag = 0) const;
  EvalReport evaluate_target(std::span<const ImageDetection> dets) const;
  std::vector<GroundTruthBox> target_ground_truth() const;
  std::vector<ImageId> target_image_ids() const;

  // Test-time self-training on the target pool from `initial`. The callback,
  // when given, sees the teacher after every iteration.
  using Observer = std::function<void(int iteration, const SelfTrainState&, const StepStats&)>;
  SelfTrainState self_train(const ParamVector& initial, const Observer& observer = {});

 private:
  ParamVector fit_stage1(bool strong);
  ParamVector fit_stage2(const ParamVector& start);

  SimulationConfig cfg_;
  std::vector<Scene> source_, aux_, target_;
  std::vector<ClassPrior> priors_;
  InstanceBank bank_;
  // stage 2 and 3 results, indexed by the stage-1 variant they build on (0 = S1*, 1 = S1)
  std::optional<ParamVector> s1_weak_, s1_, s2_[2], s3_[2];
};

// Rows for the cumulative ladder of the requested stages: S1* (if listed),
// S1, S1+S2, S1+S2+S3, then the last row again with TTA when `tta` is set.
std::vector<AblationRow> ablation_table(Simulation& sim, const StageSet& requested, bool tta);
std::string format_ablation(std::span<const AblationRow> rows);

}  // namespace detadapt

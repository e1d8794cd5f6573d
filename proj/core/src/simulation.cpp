#include <cstdio>
#include <sstream>

#include "detadapt/error.hpp"
#include "detadapt/random.hpp"
#include "detadapt/simulator.hpp"

namespace detadapt {

namespace {

constexpr std::uint64_t kSourcePool = 1;
constexpr std::uint64_t kAuxPool = 2;
constexpr std::uint64_t kTargetPool = 3;
constexpr std::uint64_t kBankPool = 4;
constexpr std::uint64_t kAuxShift = 5;
constexpr std::uint64_t kStage1 = 11;
constexpr std::uint64_t kStage2 = 12;
constexpr std::uint64_t kStage3 = 13;
constexpr std::uint64_t kEvaluation = 21;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

// The ladder of stages may list both stage-1 variants; a single run may not.
void validate_ladder(const StageSet& s) {
  if (!s.s1 && !s.s1_weak) throw ConfigError("stage list needs S1 or S1*");
  if (s.s3 && !s.s2) throw ConfigError("S3 requires S2");
}

std::vector<int> sample_indices(std::uint64_t seed, std::size_t pool, int count) {
  Rng rng(seed);
  std::vector<int> out;
  for (int i = 0; i < count; ++i) out.push_back(static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(pool) - 1)));
  return out;
}

}  // namespace

StageSet StageSet::parse(std::string_view list) {
  StageSet s;
  bool any = false;
  while (true) {
    const auto comma = list.find(',');
    const std::string_view token = trim(list.substr(0, comma));
    if (token == "S1*") s.s1_weak = true;
    else if (token == "S1") s.s1 = true;
    else if (token == "S2") s.s2 = true;
    else if (token == "S3") s.s3 = true;
    else throw ConfigError("unknown stage '" + std::string(token) + "' (expected S1*, S1, S2 or S3)");
    any = true;
    if (comma == std::string_view::npos) break;
    list.remove_prefix(comma + 1);
  }
  if (!any) throw ConfigError("empty stage list");
  return s;
}

std::string StageSet::label() const {
  std::string out;
  auto add = [&](const char* name) {
    if (!out.empty()) out += '+';
    out += name;
  };
  if (s1_weak) add("S1*");
  if (s1) add("S1");
  if (s2) add("S2");
  if (s3) add("S3");
  return out;
}

void StageSet::validate() const {
  if (s1 == s1_weak) throw ConfigError("exactly one of S1 and S1* must be selected");
  if (s3 && !s2) throw ConfigError("S3 requires S2");
}

void SimulationConfig::validate() const {
  world.validate();
  detector.validate();
  if (!(target_shift >= 0.0)) throw ConfigError("target shift must be non-negative");
  if (source_scenes < 1 || aux_scenes < 1 || target_scenes < 1)
    throw ConfigError("every scene pool needs at least one scene");
  if (bank_size < 0) throw ConfigError("bank size must be non-negative");
  if (!(aux_shift_min >= 0.0 && aux_shift_min <= aux_shift_max)) throw ConfigError("aux shift range is invalid");
  if (stage1_iterations < 1 || stage2_iterations < 0) throw ConfigError("stage iteration counts are invalid");
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw ConfigError("learning rate must lie in (0, 1]");
  if (!(stage2_momentum >= 0.0 && stage2_momentum < 1.0)) throw ConfigError("stage-2 momentum must lie in [0, 1)");
  if (!(match_iou > 0.0 && match_iou <= 1.0)) throw ConfigError("match IoU must lie in (0, 1]");
  strong.validate();
  weak.validate();
  stage2_pseudo.validate();
  self_train.validate();
  tta.validate();
  fusion.validate();
}

std::string AblationRow::label() const { return stages.label() + (tta ? "+TTA" : ""); }

Simulation::Simulation(SimulationConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  cfg_.detector.num_categories = cfg_.world.num_categories;

  WorldConfig world = cfg_.world;
  world.seed = derive_seed(cfg_.seed, {kSourcePool});
  world.shift = 0.0;
  for (int i = 0; i < cfg_.source_scenes; ++i) source_.push_back(generate_scene(world, i));

  world.seed = derive_seed(cfg_.seed, {kBankPool});
  bank_ = build_instance_bank(world, cfg_.bank_size);

  world.seed = derive_seed(cfg_.seed, {kAuxPool});
  for (int i = 0; i < cfg_.aux_scenes; ++i) {
    Rng rng(derive_seed(cfg_.seed, {kAuxShift, static_cast<std::uint64_t>(i)}));
    world.shift = rng.uniform(cfg_.aux_shift_min, cfg_.aux_shift_max);
    aux_.push_back(generate_scene(world, i));
    ClassPrior prior;
    prior.image_id = i;
    for (const LabeledBox& b : aux_.back().boxes) prior.categories.insert(b.category);
    priors_.push_back(std::move(prior));
  }

  world.seed = derive_seed(cfg_.seed, {kTargetPool});
  world.shift = cfg_.target_shift;
  for (int i = 0; i < cfg_.target_scenes; ++i) target_.push_back(generate_scene(world, i));
}

ParamVector Simulation::fit_stage1(bool strong) {
  SelfTrainState state = SelfTrainState::from_student(ParamVector(kCorrectionDim), 0.0);
  StepSettings settings;
  settings.student_aug = strong ? cfg_.strong : cfg_.weak;
  settings.learning_rate = cfg_.learning_rate;
  settings.match_iou = cfg_.match_iou;
  const std::uint64_t seed = derive_seed(cfg_.seed, {kStage1, strong ? 1u : 0u});
  for (int it = 0; it < cfg_.stage1_iterations; ++it) {
    std::vector<TrainingSample> batch;
    for (int i : sample_indices(derive_seed(seed, {0, static_cast<std::uint64_t>(it)}), source_.size(), cfg_.batch_size))
      batch.push_back({&source_[i], true, nullptr});
    state.student = train_student(state, batch, settings, cfg_.detector, bank_, seed, it);
  }
  return state.student;
}

ParamVector Simulation::fit_stage2(const ParamVector& start) {
  SelfTrainState state = SelfTrainState::from_student(start, cfg_.stage2_momentum);
  StepSettings settings;
  settings.student_aug = cfg_.strong;
  settings.teacher_aug = cfg_.weak;
  settings.fusion = cfg_.fusion;
  settings.pseudo = cfg_.stage2_pseudo;
  settings.learning_rate = cfg_.learning_rate;
  settings.match_iou = cfg_.match_iou;
  const std::uint64_t seed = derive_seed(cfg_.seed, {kStage2});
  // Half of each batch is labeled source data, half prior-filtered auxiliary data.
  const int half = std::max(1, cfg_.batch_size / 2);
  for (int it = 0; it < cfg_.stage2_iterations; ++it) {
    const auto step = static_cast<std::uint64_t>(it);
    std::vector<TrainingSample> batch;
    for (int i : sample_indices(derive_seed(seed, {0, step}), source_.size(), cfg_.batch_size - half))
      batch.push_back({&source_[i], true, nullptr});
    for (int i : sample_indices(derive_seed(seed, {1, step}), aux_.size(), half))
      batch.push_back({&aux_[i], false, &priors_[i]});
    state.student = train_student(state, batch, settings, cfg_.detector, bank_, seed, step);
    state.teacher = ema_update(state.teacher, state.student);
  }
  return state.teacher.teacher;
}

SelfTrainState Simulation::self_train(const ParamVector& initial, const Observer& observer) {
  const SelfTrainConfig& st = cfg_.self_train;
  SelfTrainState state = SelfTrainState::from_student(initial, st.momentum);
  const std::uint64_t seed = derive_seed(cfg_.seed, {kStage3});
  for (int it = 0; it < st.iterations; ++it) {
    const auto step = static_cast<std::uint64_t>(it);
    std::vector<const Scene*> batch;
    for (int i : sample_indices(derive_seed(seed, {0, step}), target_.size(), st.batch_size)) batch.push_back(&target_[i]);
    StepStats stats;
    state = self_train_step(state, batch, st, cfg_.detector, bank_, seed, step, &stats);
    if (observer) observer(it + 1, state, stats);
  }
  return state;
}

ParamVector Simulation::correction_for(const StageSet& stages) {
  stages.validate();
  const int variant = stages.s1 ? 1 : 0;
  auto& s1 = stages.s1 ? s1_ : s1_weak_;
  if (!s1) s1 = fit_stage1(stages.s1);
  if (!stages.s2) return *s1;
  if (!s2_[variant]) s2_[variant] = fit_stage2(*s1);
  if (!stages.s3) return *s2_[variant];
  if (!s3_[variant]) s3_[variant] = self_train(*s2_[variant]).teacher.teacher;
  return *s3_[variant];
}

std::vector<ImageDetection> Simulation::detect_target(const ParamVector& c, bool tta, std::uint64_t stream_tag) const {
  const OracleDetector detector(cfg_.detector, c);
  std::vector<ImageDetection> out;
  for (std::size_t i = 0; i < target_.size(); ++i) {
    // The stream depends on the scene only, so every correction sees the same noise.
    const std::uint64_t stream = derive_seed(cfg_.seed, {kEvaluation, stream_tag, i});
    const auto dets = tta ? tta_merge(tta_expand(target_[i], cfg_.tta, detector, stream), cfg_.fusion)
                          : detector.detect(target_[i], stream);
    for (const Detection& d : dets) out.push_back({static_cast<ImageId>(i), d});
  }
  return out;
}

std::vector<GroundTruthBox> Simulation::target_ground_truth() const {
  std::vector<GroundTruthBox> out;
  for (std::size_t i = 0; i < target_.size(); ++i)
    for (const LabeledBox& b : target_[i].boxes) out.push_back({static_cast<ImageId>(i), b.box, b.category});
  return out;
}

std::vector<ImageId> Simulation::target_image_ids() const {
  std::vector<ImageId> ids(target_.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<ImageId>(i);
  return ids;
}

EvalReport Simulation::evaluate_target(std::span<const ImageDetection> dets) const {
  const auto gts = target_ground_truth();
  const auto ids = target_image_ids();
  return evaluate(dets, gts, ids, cfg_.world.num_categories, cfg_.eval);
}

AblationRow Simulation::run(const StageSet& stages, bool tta) {
  AblationRow row;
  row.stages = stages;
  row.tta = tta;
  row.correction = correction_for(stages);
  const auto dets = detect_target(row.correction, tta);
  row.map50 = evaluate_target(dets).map50;
  return row;
}

std::vector<AblationRow> ablation_table(Simulation& sim, const StageSet& requested, bool tta) {
  validate_ladder(requested);
  std::vector<StageSet> ladder;
  if (requested.s1_weak) ladder.push_back({true, false, false, false});
  if (requested.s1) ladder.push_back({false, true, false, false});
  StageSet top = ladder.back();
  if (requested.s2) {
    top.s2 = true;
    ladder.push_back(top);
  }
  if (requested.s3) {
    top.s3 = true;
    ladder.push_back(top);
  }
  std::vector<AblationRow> rows;
  for (const StageSet& s : ladder) rows.push_back(sim.run(s, false));
  if (tta) rows.push_back(sim.run(ladder.back(), true));
  return rows;
}

std::string format_ablation(std::span<const AblationRow> rows) {
  std::size_t width = 6;
  for (const AblationRow& r : rows) width = std::max(width, r.label().size());
  std::ostringstream out;
  char buf[64];
  out << "config" << std::string(width - 6 + 2, ' ') << "AP50\n";
  for (const AblationRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%.4f", 100.0 * r.map50);
    out << r.label() << std::string(width - r.label().size() + 2, ' ') << buf << '\n';
  }
  return out.str();
}

}  // namespace detadapt

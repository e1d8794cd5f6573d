#include "cli.hpp"

#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "detadapt/error.hpp"
#include "detadapt/fusion.hpp"
#include "detadapt/io/coco.hpp"
#include "detadapt/io/run_config.hpp"
#include "detadapt/pseudo_label.hpp"
#include "detadapt/simulator.hpp"

namespace detadapt::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Options {
  std::optional<std::uint64_t> seed;

  fs::path gt;
  std::vector<fs::path> dets;
  fs::path out;
  double iou = 0.5;
  std::string interp = "all";

  std::string weights;
  double iou_thr_fuse = 0.55;
  double iou_thr_nms = 0.5;
  double skip_thr = 0.0;
  bool no_rescale = false;

  fs::path priors;
  double score_thr = 0.5;

  std::vector<std::string> views;

  fs::path config;
  std::string stages;
  bool tta = false;
};

void emit(const std::string& text, const fs::path& out, std::ostream& stream) {
  if (out.empty()) {
    stream << text;
  } else {
    io::write_file(out, text);
  }
}

json to_json(const ParamVector& v) { return json(std::vector<double>(v.values().begin(), v.values().end())); }

json report_json(const EvalReport& r, const io::GroundTruthIndex& index) {
  json classes = json::array();
  for (const ClassResult& c : r.classes)
    classes.push_back({{"category_id", index.category_ids[c.category]},
                       {"name", index.category_names[c.category]},
                       {"ap50", c.ap},
                       {"tp", c.true_positives},
                       {"fp", c.false_positives},
                       {"num_gt", c.num_gt},
                       {"detections_without_gt", c.detections_without_gt}});
  return {{"map50", r.map50}, {"classes_with_gt", r.classes_with_gt}, {"classes", classes}};
}

std::vector<double> parse_weights(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double w = 0;
    try {
      w = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw ConfigError("--weights: '" + item + "' is not a number");
    out.push_back(w);
  }
  return out;
}

io::GroundTruthIndex frame_index(const Options& o, const std::vector<fs::path>& files) {
  return o.gt.empty() ? io::frame_from_detections(files) : io::load_ground_truth(o.gt);
}

io::RunConfig load_config(const Options& o) {
  io::RunConfig cfg = io::load_run_config(o.config);
  if (o.seed) cfg.set_seed(*o.seed);
  return cfg;
}

fs::path output_path(const Options& o, const io::RunConfig& cfg) {
  if (!o.out.empty()) return o.out;
  return cfg.output.value_or(fs::path{});
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  if (o.interp != "all" && o.interp != "11pt") throw ConfigError("--interp must be 'all' or '11pt'");
  const auto index = io::load_ground_truth(o.gt);
  const auto dets = io::load_detections(o.dets.at(0), index);
  EvalOptions opts;
  opts.iou_min = o.iou;
  opts.interpolation = o.interp == "all" ? Interpolation::all_point : Interpolation::eleven_point;
  if (!(opts.iou_min > 0.0 && opts.iou_min <= 1.0)) throw ConfigError("--iou must lie in (0, 1]");
  const auto ids = index.image_ids();
  const EvalReport report = evaluate(dets, index.boxes, ids, index.num_categories(), opts);
  out << report.to_text(index.category_names);
  if (!o.out.empty()) io::write_file(o.out, report_json(report, index).dump(2) + "\n");
  return 0;
}

int cmd_fuse(const Options& o, std::ostream& out, std::ostream& err) {
  const auto index = frame_index(o, o.dets);
  EnsembleSpec spec;
  const std::vector<double> weights = o.weights.empty() ? std::vector<double>(o.dets.size(), 1.0) : parse_weights(o.weights);
  if (weights.size() != o.dets.size())
    throw ConfigError("--weights needs one value per --dets file (" + std::to_string(o.dets.size()) + ")");
  for (std::size_t i = 0; i < o.dets.size(); ++i) {
    EnsembleSource src;
    src.name = o.dets[i].string();
    src.predictions = io::group_by_image(io::load_detections(o.dets[i], index));
    src.weight = weights[i];
    spec.sources.push_back(std::move(src));
  }
  spec.fusion.iou_threshold = o.iou_thr_fuse;
  spec.fusion.skip_threshold = o.skip_thr;
  spec.fusion.score_rescale = !o.no_rescale;
  const EnsembleResult result = ensemble_fuse(spec);
  for (const std::string& w : result.warnings) err << "warning: " << w << '\n';
  emit(io::format_detections(io::flatten(result.fused), index), o.out, out);
  return 0;
}

int cmd_nms(const Options& o, std::ostream& out) {
  const auto index = frame_index(o, o.dets);
  if (!(o.iou_thr_nms >= 0.0 && o.iou_thr_nms <= 1.0)) throw ConfigError("--iou-thr must lie in [0, 1]");
  PerImageDetections kept;
  for (const auto& [id, dets] : io::group_by_image(io::load_detections(o.dets.at(0), index)))
    kept[id] = nms(dets, o.iou_thr_nms);
  emit(io::format_detections(io::flatten(kept), index), o.out, out);
  return 0;
}

int cmd_filter(const Options& o, std::ostream& out) {
  io::GroundTruthIndex index = frame_index(o, o.dets);
  if (o.gt.empty()) {
    // Prior files may name images and categories that have no detections.
    const json priors = json::parse(io::read_file(o.priors), nullptr, false);
    if (priors.is_object())
      for (const auto& [key, cats] : priors.items()) {
        try {
          index.images.try_emplace(std::stoll(key), io::ImageInfo{{1, 1}, ""});
        } catch (const std::exception&) {
        }
        if (cats.is_array())
          for (const json& c : cats)
            if (c.is_number_integer()) {
              const int id = c.get<int>();
              auto it = std::lower_bound(index.category_ids.begin(), index.category_ids.end(), id);
              if (it == index.category_ids.end() || *it != id) {
                index.category_names.insert(index.category_names.begin() + (it - index.category_ids.begin()),
                                            std::to_string(id));
                index.category_ids.insert(it, id);
              }
            }
      }
  }
  const auto priors = io::load_priors(o.priors, index);
  PseudoLabelConfig cfg{o.score_thr, true};
  cfg.validate();
  PerImageDetections kept;
  for (const auto& [id, dets] : io::group_by_image(io::load_detections(o.dets.at(0), index))) {
    const auto it = priors.find(id);
    kept[id] = generate_pseudo_labels(dets, it == priors.end() ? nullptr : &it->second, cfg);
  }
  emit(io::format_detections(io::flatten(kept), index), o.out, out);
  return 0;
}

int cmd_tta_merge(const Options& o, std::ostream& out) {
  if (o.gt.empty()) throw ConfigError("tta-merge needs --gt for the original image sizes");
  const auto index = io::load_ground_truth(o.gt);
  std::vector<std::pair<fs::path, GeomTransform>> views;
  for (const std::string& v : o.views) {
    const auto colon = v.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == v.size())
      throw ConfigError("--views entries must look like file:transform, got '" + v + "'");
    try {
      views.emplace_back(v.substr(0, colon), parse_transform(v.substr(colon + 1)));
    } catch (const DataError& e) {
      throw ConfigError(std::string("--views: ") + e.what());
    }
  }
  // Each view file is in its own resized frame.
  std::map<ImageId, std::vector<ViewDetections>> per_image;
  for (const auto& [path, t] : views) {
    io::GroundTruthIndex view_index = index;
    view_index.boxes.clear();
    for (auto& [id, info] : view_index.images) info.size = t.apply(info.size);
    const auto grouped = io::group_by_image(io::load_detections(path, view_index));
    for (const auto& [id, info] : index.images) {
      const auto it = grouped.find(id);
      per_image[id].push_back({t, it == grouped.end() ? std::vector<Detection>{} : it->second});
    }
  }
  FusionConfig cfg;
  cfg.iou_threshold = o.iou_thr_fuse;
  PerImageDetections merged;
  for (const auto& [id, vs] : per_image) merged[id] = tta_merge(vs, cfg);
  emit(io::format_detections(io::flatten(merged), index), o.out, out);
  return 0;
}

int cmd_self_train(const Options& o, std::ostream& out) {
  const io::RunConfig cfg = load_config(o);
  Simulation sim(cfg.simulation);
  const ParamVector exact = exact_correction(sim.config().detector, sim.config().target_shift);
  const ParamVector initial = cfg.initial_correction();

  json log = json::array();
  auto record = [&](int iteration, const ParamVector& teacher, const StepStats* stats) {
    const double map50 = sim.evaluate_target(sim.detect_target(teacher, false)).map50;
    json entry = {{"iteration", iteration}, {"map50", map50}, {"distance", distance(teacher, exact)}, {"teacher", to_json(teacher)}};
    if (stats) entry["pseudo_labels"] = stats->pseudo_labels;
    log.push_back(std::move(entry));
  };
  record(0, initial, nullptr);
  const SelfTrainState final_state = sim.self_train(initial, [&](int it, const SelfTrainState& s, const StepStats& st) {
    record(it, s.teacher.teacher, &st);
  });

  const ParamVector& c = final_state.teacher.teacher;
  char line[200];
  std::snprintf(line, sizeof line, "iterations %d  start mAP50 %.4f  final mAP50 %.4f\n",
                sim.config().self_train.iterations, log.front()["map50"].get<double>(), log.back()["map50"].get<double>());
  out << line;
  std::snprintf(line, sizeof line, "teacher (%.6f, %.6f)  exact (%.6f, %.6f)  |c - c*| %.6f\n", c[0], c[1], exact[0],
                exact[1], distance(c, exact));
  out << line;

  const fs::path path = output_path(o, cfg);
  if (!path.empty()) {
    const json doc = {{"seed", cfg.seed()},
                      {"parameters", to_json(c)},
                      {"student", to_json(final_state.student)},
                      {"exact", to_json(exact)},
                      {"distance", distance(c, exact)},
                      {"log", log}};
    io::write_file(path, doc.dump(2) + "\n");
  }
  return 0;
}

int cmd_simulate(const Options& o, std::ostream& out) {
  const io::RunConfig cfg = load_config(o);
  const std::string stages = !o.stages.empty() ? o.stages : cfg.stages.value_or("S1*,S1,S2,S3");
  const bool tta = o.tta || cfg.tta;
  const StageSet requested = StageSet::parse(stages);
  Simulation sim(cfg.simulation);
  const auto rows = ablation_table(sim, requested, tta);
  out << format_ablation(rows);

  const fs::path path = output_path(o, cfg);
  if (!path.empty()) {
    json table = json::array();
    for (const AblationRow& r : rows)
      table.push_back({{"config", r.label()}, {"stages", r.stages.label()}, {"tta", r.tta}, {"map50", r.map50},
                       {"correction", to_json(r.correction)}});
    const json doc = {{"seed", cfg.seed()},
                      {"target_shift", sim.config().target_shift},
                      {"exact_correction", to_json(exact_correction(sim.config().detector, sim.config().target_shift))},
                      {"rows", table}};
    io::write_file(path, doc.dump(2) + "\n");
  }
  return 0;
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Detection adaptation toolkit: evaluation, fusion, pseudo-labels and a synthetic ablation simulator"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--seed", o.seed, "Override the master seed of any configuration");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "AP50 of a detection file against COCO ground truth");
  evaluate_cmd->add_option("--gt", o.gt, "Ground-truth annotation file")->required();
  evaluate_cmd->add_option("--dets", o.dets, "Detection results file")->required()->expected(1);
  evaluate_cmd->add_option("--iou", o.iou, "IoU threshold for a true positive");
  evaluate_cmd->add_option("--interp", o.interp, "Interpolation: all or 11pt");
  evaluate_cmd->add_option("--out", o.out, "Also write the report as JSON");

  auto* fuse_cmd = app.add_subcommand("fuse", "Weighted box fusion across detection files");
  fuse_cmd->add_option("--dets", o.dets, "Detection files, one per source")->required();
  fuse_cmd->add_option("--weights", o.weights, "Comma-separated source weights");
  fuse_cmd->add_option("--iou-thr", o.iou_thr_fuse, "Cluster IoU threshold");
  fuse_cmd->add_option("--skip-thr", o.skip_thr, "Drop boxes scoring below this");
  fuse_cmd->add_flag("--no-rescale", o.no_rescale, "Do not scale fused scores by source agreement");

  auto* nms_cmd = app.add_subcommand("nms", "Greedy per-category non-maximum suppression");
  nms_cmd->add_option("--dets", o.dets, "Detection file")->required()->expected(1);
  nms_cmd->add_option("--iou-thr", o.iou_thr_nms, "Suppression IoU threshold");

  auto* filter_cmd = app.add_subcommand("filter", "Pseudo-label filtering by score and image-level classes");
  filter_cmd->add_option("--dets", o.dets, "Detection file")->required()->expected(1);
  filter_cmd->add_option("--priors", o.priors, "JSON map of image id to category ids")->required();
  filter_cmd->add_option("--score-thr", o.score_thr, "Minimum score kept (inclusive)");

  auto* tta_cmd = app.add_subcommand("tta-merge", "Merge per-view detections of test-time augmentation");
  tta_cmd->add_option("--views", o.views, "file:transform pairs, e.g. dets.json:hflip+h512")->required();
  tta_cmd->add_option("--iou-thr", o.iou_thr_fuse, "Cluster IoU threshold");

  for (auto* cmd : {fuse_cmd, nms_cmd, filter_cmd, tta_cmd}) {
    cmd->add_option("--gt", o.gt, "Ground-truth file supplying image sizes and categories");
    cmd->add_option("--out", o.out, "Output detection file (default: stdout)");
  }

  auto* self_train_cmd = app.add_subcommand("self-train", "Test-time self-training on the simulator");
  self_train_cmd->add_option("--config", o.config, "Run configuration")->required();
  self_train_cmd->add_option("--out", o.out, "Write parameters and the per-iteration log as JSON");

  auto* simulate_cmd = app.add_subcommand("simulate", "Stage ablation on the simulator");
  simulate_cmd->add_option("--config", o.config, "Run configuration")->required();
  simulate_cmd->add_option("--stages", o.stages, "Stage list, e.g. S1*,S1,S2,S3");
  simulate_cmd->add_flag("--tta", o.tta, "Add a row for the last stage with test-time augmentation");
  simulate_cmd->add_option("--out", o.out, "Write the table as JSON");

  for (auto* cmd : app.get_subcommands({})) cmd->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::ostringstream msg, unused;
    app.exit(e, unused, msg);
    err << msg.str();
    return 1;
  }

  try {
    if (*evaluate_cmd) return cmd_evaluate(o, out);
    if (*fuse_cmd) return cmd_fuse(o, out, err);
    if (*nms_cmd) return cmd_nms(o, out);
    if (*filter_cmd) return cmd_filter(o, out);
    if (*tta_cmd) return cmd_tta_merge(o, out);
    if (*self_train_cmd) return cmd_self_train(o, out);
    if (*simulate_cmd) return cmd_simulate(o, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace detadapt::cli

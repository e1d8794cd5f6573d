#include "detadapt/io/run_config.hpp"

#include <set>

#include <nlohmann/json.hpp>

#include "detadapt/error.hpp"
#include "detadapt/io/coco.hpp"

namespace detadapt::io {

using nlohmann::json;

namespace {

// Reads the members of one JSON object, remembering which keys were used so
// leftovers can be reported.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "configuration must be a JSON object" : "expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  void get(const char* key, double& out) { read(key, [&](const json& v) { need(v.is_number(), key, "a number"); out = v.get<double>(); }); }
  void get(const char* key, int& out) { read(key, [&](const json& v) { need(v.is_number_integer(), key, "an integer"); out = v.get<int>(); }); }
  void get(const char* key, bool& out) { read(key, [&](const json& v) { need(v.is_boolean(), key, "a boolean"); out = v.get<bool>(); }); }
  void get(const char* key, std::uint64_t& out) {
    read(key, [&](const json& v) {
      need(v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0), key, "a non-negative integer");
      out = v.get<std::uint64_t>();
    });
  }
  void get(const char* key, std::string& out) { read(key, [&](const json& v) { need(v.is_string(), key, "a string"); out = v.get<std::string>(); }); }

  template <class F>
  void sub(const char* key, F&& f) {
    read(key, [&](const json& v) {
      Section s(v, child(key));
      f(s);
      s.finish();
    });
  }

  template <class F>
  void raw(const char* key, F&& f) {
    read(key, f);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!used_.contains(key)) throw ConfigError(where(key) + ": unknown key");
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw ConfigError((path_.empty() ? std::string("config") : path_) + ": " + why);
  }
  std::string child(const char* key) const { return where(key); }

 private:
  template <class F>
  void read(const char* key, F&& f) {
    used_.insert(key);
    const auto it = j_.find(key);
    if (it != j_.end()) f(*it);
  }
  void need(bool ok, const char* key, const char* what) const {
    if (!ok) throw ConfigError(where(key) + ": expected " + what);
  }
  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

std::vector<double> number_list(const json& v, const std::string& where, std::size_t expected = 0) {
  if (!v.is_array()) throw ConfigError(where + ": expected an array of numbers");
  std::vector<double> out;
  for (const json& x : v) {
    if (!x.is_number()) throw ConfigError(where + ": expected an array of numbers");
    out.push_back(x.get<double>());
  }
  if (expected && out.size() != expected)
    throw ConfigError(where + ": expected " + std::to_string(expected) + " numbers");
  return out;
}

void read_range(Section& s, const char* key, double& lo, double& hi) {
  s.raw(key, [&](const json& v) {
    const auto r = number_list(v, s.child(key), 2);
    lo = r[0];
    hi = r[1];
  });
}

void read_range(Section& s, const char* key, int& lo, int& hi) {
  s.raw(key, [&](const json& v) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer())
      throw ConfigError(s.child(key) + ": expected [min, max] integers");
    lo = v[0].get<int>();
    hi = v[1].get<int>();
  });
}

void read_world(Section& s, WorldConfig& w) {
  s.raw("image_size", [&](const json& v) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer())
      throw ConfigError(s.child("image_size") + ": expected [width, height]");
    w.image = {v[0].get<int>(), v[1].get<int>()};
  });
  s.get("num_categories", w.num_categories);
  read_range(s, "objects", w.objects_min, w.objects_max);
  read_range(s, "object_size", w.size_min, w.size_max);
}

void read_detector(Section& s, DetectorParams& p) {
  s.get("scale_bias", p.scale_bias);
  s.get("noise", p.noise);
  s.get("miss_rate", p.miss_rate);
  s.get("fp_rate", p.fp_rate);
  s.get("score_slope", p.score_slope);
  s.get("fp_score_max", p.fp_score_max);
}

void read_augment(Section& s, AugConfig& a) {
  s.get("p_resize", a.p_resize);
  s.get("p_copy_paste", a.p_copy_paste);
  s.get("p_mixup", a.p_mixup);
  s.get("p_blur_noise", a.p_blur_noise);
  s.get("p_color_jitter", a.p_color_jitter);
  s.get("p_random_erase", a.p_random_erase);
  s.get("p_weather", a.p_weather);
  s.get("p_hflip", a.p_hflip);
  s.get("p_rotate", a.p_rotate);
  read_range(s, "resize_height", a.resize_min, a.resize_max);
  s.get("reference_height", a.reference_height);
  read_range(s, "paste_count", a.paste_min, a.paste_max);
  read_range(s, "mixup_lambda", a.mixup_lambda_min, a.mixup_lambda_max);
  s.get("jitter_strength", a.jitter_strength);
  read_range(s, "severity", a.severity_min, a.severity_max);
  read_range(s, "erase_area", a.erase_area_min, a.erase_area_max);
  read_range(s, "erase_aspect", a.erase_aspect_min, a.erase_aspect_max);
  s.get("rotate_max_degrees", a.rotate_max_degrees);
}

void read_fusion(Section& s, FusionConfig& f) {
  s.get("iou_threshold", f.iou_threshold);
  s.get("skip_threshold", f.skip_threshold);
  s.get("score_rescale", f.score_rescale);
  s.raw("match", [&](const json& v) {
    if (v == "first") f.match = ClusterMatch::first;
    else if (v == "best") f.match = ClusterMatch::best;
    else throw ConfigError(s.child("match") + ": expected \"first\" or \"best\"");
  });
}

void read_pseudo(Section& s, PseudoLabelConfig& p) {
  s.get("score_threshold", p.score_threshold);
  s.get("use_class_prior", p.use_class_prior);
}

TtaSpec read_views(const json& v, const std::string& where) {
  if (v == "identity") return TtaSpec::identity();
  if (v == "multi_scale_flip") return TtaSpec::multi_scale_flip();
  if (!v.is_array()) throw ConfigError(where + ": expected \"identity\", \"multi_scale_flip\" or a list of transforms");
  TtaSpec spec;
  for (const json& t : v) {
    if (!t.is_string()) throw ConfigError(where + ": transforms must be strings");
    try {
      spec.views.push_back(parse_transform(t.get<std::string>()));
    } catch (const std::exception& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  return spec;
}

void read_eval(Section& s, EvalOptions& e) {
  s.get("iou", e.iou_min);
  s.raw("interpolation", [&](const json& v) {
    if (v == "all") e.interpolation = Interpolation::all_point;
    else if (v == "11pt") e.interpolation = Interpolation::eleven_point;
    else throw ConfigError(s.child("interpolation") + ": expected \"all\" or \"11pt\"");
  });
}

void read_self_train(Section& s, SelfTrainConfig& st, RunConfig& cfg) {
  s.get("iterations", st.iterations);
  s.get("momentum", st.momentum);
  s.get("batch_size", st.batch_size);
  s.get("learning_rate", st.learning_rate);
  s.get("match_iou", st.match_iou);
  s.sub("pseudo_label", [&](Section& p) { read_pseudo(p, st.pseudo); });
  s.sub("augment", [&](Section& a) { read_augment(a, st.strong); });
  s.sub("weak_augment", [&](Section& a) { read_augment(a, st.weak); });
  s.sub("fusion", [&](Section& f) { read_fusion(f, st.fusion); });
  s.raw("teacher_views", [&](const json& v) { st.teacher_views = read_views(v, s.child("teacher_views")); });
  s.raw("start", [&](const json& v) {
    if (v == "source") {
      cfg.self_train_start = StartPoint::source;
    } else if (v == "zero") {
      cfg.self_train_start = StartPoint::zero;
    } else if (v.is_array()) {
      cfg.self_train_start = StartPoint::explicit_value;
      cfg.self_train_initial = ParamVector(number_list(v, s.child("start"), kCorrectionDim));
    } else {
      throw ConfigError(s.child("start") + ": expected \"source\", \"zero\" or [cw, ch]");
    }
  });
}

void read_simulation(Section& s, SimulationConfig& sim, RunConfig& cfg) {
  s.get("target_shift", sim.target_shift);
  s.get("source_scenes", sim.source_scenes);
  s.get("aux_scenes", sim.aux_scenes);
  s.get("target_scenes", sim.target_scenes);
  s.get("bank_size", sim.bank_size);
  read_range(s, "aux_shift", sim.aux_shift_min, sim.aux_shift_max);
  s.get("stage1_iterations", sim.stage1_iterations);
  s.get("stage2_iterations", sim.stage2_iterations);
  s.get("batch_size", sim.batch_size);
  s.get("learning_rate", sim.learning_rate);
  s.get("stage2_momentum", sim.stage2_momentum);
  s.get("match_iou", sim.match_iou);
  s.get("tta", cfg.tta);
  s.raw("stages", [&](const json& v) {
    if (!v.is_string()) throw ConfigError(s.child("stages") + ": expected a string such as \"S1*,S1,S2,S3\"");
    StageSet::parse(v.get<std::string>());
    cfg.stages = v.get<std::string>();
  });
}

}  // namespace

void RunConfig::set_seed(std::uint64_t seed) {
  simulation.seed = seed;
  simulation.world.seed = seed;
  simulation.strong.seed = seed;
  simulation.weak.seed = seed;
  simulation.self_train.strong.seed = seed;
  simulation.self_train.weak.seed = seed;
}

ParamVector RunConfig::initial_correction() const {
  switch (self_train_start) {
    case StartPoint::zero: return ParamVector(kCorrectionDim);
    case StartPoint::explicit_value: return *self_train_initial;
    case StartPoint::source: break;
  }
  return exact_correction(simulation.detector, 0.0);
}

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": invalid JSON: " + e.what());
  }
  RunConfig cfg;
  SimulationConfig& sim = cfg.simulation;
  try {
    Section root(doc, "");
    std::uint64_t seed = 0;
    root.get("seed", seed);
    root.sub("world", [&](Section& s) { read_world(s, sim.world); });
    root.sub("detector", [&](Section& s) { read_detector(s, sim.detector); });
    root.sub("augment", [&](Section& s) { read_augment(s, sim.strong); });
    root.sub("weak_augment", [&](Section& s) { read_augment(s, sim.weak); });
    root.sub("fusion", [&](Section& s) { read_fusion(s, sim.fusion); });
    root.sub("pseudo_label", [&](Section& s) { read_pseudo(s, sim.stage2_pseudo); });
    root.raw("tta", [&](const json& v) {
      if (v.is_object()) {
        Section t(v, "tta");
        t.raw("views", [&](const json& views) { sim.tta = read_views(views, "tta.views"); });
        t.finish();
      } else {
        sim.tta = read_views(v, "tta");
      }
    });
    root.sub("eval", [&](Section& s) { read_eval(s, sim.eval); });
    root.sub("self_train", [&](Section& s) { read_self_train(s, sim.self_train, cfg); });
    root.sub("simulation", [&](Section& s) { read_simulation(s, sim, cfg); });
    root.raw("output", [&](const json& v) {
      if (!v.is_string()) throw ConfigError("output: expected a path string");
      cfg.output = v.get<std::string>();
    });
    root.finish();
    cfg.set_seed(seed);
    sim.detector.num_categories = sim.world.num_categories;
    sim.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  } catch (const DataError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return parse_run_config(text, path.string());
}

}  // namespace detadapt::io

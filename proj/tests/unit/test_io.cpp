#include <gtest/gtest.h>

#include <filesystem>
#include <functional>
#include <random>
#include <set>

#include "detadapt/error.hpp"
#include "detadapt/io/coco.hpp"
#include "detadapt/io/run_config.hpp"

using namespace detadapt;
namespace fs = std::filesystem;

namespace {

const char* kGroundTruth = R"({
  "images": [{"id": 1, "width": 100, "height": 100, "file_name": "a.png"},
             {"id": 2, "width": 200, "height": 100}],
  "categories": [{"id": 7, "name": "car"}, {"id": 3, "name": "person"}],
  "annotations": [
    {"id": 1, "image_id": 1, "category_id": 7, "bbox": [0, 0, 100, 100]},
    {"id": 2, "image_id": 2, "category_id": 3, "bbox": [20, 10, 40, 50]}
  ]
})";

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("detadapt_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                      "_" + name);
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const DataError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(GroundTruth, ParsesAndNormalizes) {
  const io::GroundTruthIndex gt = io::parse_ground_truth(kGroundTruth, "gt.json");
  EXPECT_EQ(gt.num_categories(), 2);
  EXPECT_EQ(gt.category_ids, (std::vector<int>{3, 7}));
  EXPECT_EQ(gt.category_names, (std::vector<std::string>{"person", "car"}));
  ASSERT_EQ(gt.boxes.size(), 2u);
  EXPECT_EQ(gt.boxes[0].box, (BBox{0, 0, 1, 1}));
  EXPECT_EQ(gt.boxes[0].category, 1);
  EXPECT_NEAR(gt.boxes[1].box.x1, 0.1, 1e-12);
  EXPECT_NEAR(gt.boxes[1].box.y2, 0.6, 1e-12);
  EXPECT_EQ(gt.image(1).file_name, "a.png");
  EXPECT_EQ(gt.image_ids(), (std::vector<ImageId>{1, 2}));
  EXPECT_THROW(gt.category_index(99), DataError);
}

TEST(GroundTruth, EmptyAnnotationsEvaluateToZero) {
  const auto gt = io::parse_ground_truth(R"({"images": [{"id": 1, "width": 10, "height": 10}],
                                             "categories": [{"id": 1}], "annotations": []})", "gt");
  const auto dets = io::parse_detections(R"([{"image_id": 1, "category_id": 1, "bbox": [1, 1, 4, 4], "score": 0.9}])",
                                         "d", gt);
  const auto ids = gt.image_ids();
  const EvalReport r = evaluate(dets, gt.boxes, ids, gt.num_categories());
  EXPECT_EQ(r.map50, 0.0);
  EXPECT_EQ(r.classes_with_gt, 0);
}

TEST(GroundTruth, RecordLevelDiagnostics) {
  const std::string bad_box = R"({"images": [{"id": 1, "width": 10, "height": 10}], "categories": [{"id": 1}],
    "annotations": [{"image_id": 1, "category_id": 1, "bbox": [1, 1, 2, 2]},
                    {"image_id": 1, "category_id": 1, "bbox": [1, 1, 0, 2]}]})";
  const std::string msg = error_of([&] { io::parse_ground_truth(bad_box, "gt.json"); });
  EXPECT_NE(msg.find("gt.json"), std::string::npos) << msg;
  EXPECT_NE(msg.find("annotations record 1"), std::string::npos) << msg;
  EXPECT_NE(msg.find("degenerate"), std::string::npos) << msg;

  EXPECT_NE(error_of([] { io::parse_ground_truth("{not json", "x"); }).find("invalid JSON"), std::string::npos);
  EXPECT_NE(error_of([] { io::parse_ground_truth(R"({"images": [], "categories": [{"id": 1}, {"id": 1}]})", "x"); })
                .find("duplicate category"),
            std::string::npos);
  EXPECT_NE(error_of([] {
              io::parse_ground_truth(R"({"images": [{"id": 1, "width": 10, "height": 10}], "categories": [{"id": 1}],
                "annotations": [{"image_id": 1, "category_id": 1, "bbox": [5, 5, 10, 2]}]})", "x");
            }).find("annotations record 0"),
            std::string::npos);
  EXPECT_THROW(io::load_ground_truth("/nonexistent/gt.json"), DataError);
}

TEST(Detections, ParseClipsAndValidates) {
  const auto gt = io::parse_ground_truth(kGroundTruth, "gt");
  const auto dets = io::parse_detections(
      R"([{"image_id": 1, "category_id": 3, "bbox": [90, 90, 20, 20], "score": 1}])", "d", gt);
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_EQ(dets[0].det.category, 0);
  EXPECT_EQ(dets[0].det.box, (BBox{0.9, 0.9, 1.0, 1.0}));

  const std::string msg = error_of([&] {
    io::parse_detections(R"([{"image_id": 1, "category_id": 3, "bbox": [1, 1, 2, 2], "score": 0.5},
                             {"image_id": 1, "category_id": 3, "bbox": [1, 1, 2, 2], "score": 1.5}])", "dets.json", gt);
  });
  EXPECT_NE(msg.find("dets.json: detection record 1: score"), std::string::npos) << msg;
  EXPECT_THROW(io::parse_detections(R"([{"image_id": 9, "category_id": 3, "bbox": [1, 1, 2, 2], "score": 0.5}])", "d", gt),
               DataError);
  EXPECT_THROW(io::parse_detections(R"([{"image_id": 1, "category_id": 4, "bbox": [1, 1, 2, 2], "score": 0.5}])", "d", gt),
               DataError);
  EXPECT_THROW(io::parse_detections(R"([{"image_id": 1, "category_id": 3, "bbox": [120, 1, 2, 2], "score": 0.5}])", "d", gt),
               DataError);
  EXPECT_THROW(io::parse_detections(R"({"image_id": 1})", "d", gt), DataError);
}

TEST(Detections, SaveLoadRoundTrip) {
  const auto gt = io::parse_ground_truth(kGroundTruth, "gt");
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 0.5);
  std::vector<ImageDetection> dets;
  for (int i = 0; i < 200; ++i) {
    const double x = u(rng), y = u(rng);
    dets.push_back({1 + i % 2, {{x, y, x + 0.05 + 0.8 * u(rng), y + 0.05 + 0.8 * u(rng)}, i % 2, u(rng) * 2}});
  }
  const fs::path path = temp_path("roundtrip.json");
  io::save_detections(dets, gt, path);
  const auto back = io::load_detections(path, gt);
  fs::remove(path);
  ASSERT_EQ(back.size(), dets.size());

  auto per = io::group_by_image(dets), per_back = io::group_by_image(back);
  for (auto& [id, v] : per) sort_by_rank(v);
  for (const auto& [id, v] : per) {
    const auto& w = per_back.at(id);
    ASSERT_EQ(v.size(), w.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      EXPECT_EQ(v[i].category, w[i].category);
      EXPECT_NEAR(v[i].score, w[i].score, 1e-12);
      EXPECT_NEAR(v[i].box.x1, w[i].box.x1, 1e-6);
      EXPECT_NEAR(v[i].box.y1, w[i].box.y1, 1e-6);
      EXPECT_NEAR(v[i].box.x2, w[i].box.x2, 1e-6);
      EXPECT_NEAR(v[i].box.y2, w[i].box.y2, 1e-6);
    }
  }

  const auto ids = gt.image_ids();
  EXPECT_NEAR(evaluate(dets, gt.boxes, ids, 2).map50, evaluate(back, gt.boxes, ids, 2).map50, 1e-12);
}

TEST(Detections, FormatIsOrdered) {
  const auto gt = io::parse_ground_truth(kGroundTruth, "gt");
  std::vector<ImageDetection> dets{{2, {{0.1, 0.1, 0.2, 0.2}, 0, 0.9}},
                                   {1, {{0.1, 0.1, 0.2, 0.2}, 1, 0.2}},
                                   {1, {{0.1, 0.1, 0.2, 0.2}, 1, 0.8}}};
  const auto back = io::parse_detections(io::format_detections(dets, gt), "f", gt);
  EXPECT_EQ(back[0].image_id, 1);
  EXPECT_DOUBLE_EQ(back[0].det.score, 0.8);
  EXPECT_EQ(back[2].image_id, 2);
}

TEST(Priors, LoadMapsCategories) {
  const auto gt = io::parse_ground_truth(kGroundTruth, "gt");
  const fs::path path = temp_path("priors.json");
  io::write_file(path, R"({"1": [7], "2": [3, 7]})");
  const auto priors = io::load_priors(path, gt);
  EXPECT_EQ(priors.at(1).categories, (std::set<int>{1}));
  EXPECT_EQ(priors.at(2).categories, (std::set<int>{0, 1}));
  io::write_file(path, R"({"x1": [7]})");
  EXPECT_THROW(io::load_priors(path, gt), DataError);
  fs::remove(path);
}

TEST(RunConfig, DefaultsAndOverrides) {
  const io::RunConfig cfg = io::parse_run_config(
      R"({"seed": 5, "detector": {"scale_bias": 0.2}, "self_train": {"iterations": 10, "start": [0.1, -0.1]}})", "c");
  EXPECT_EQ(cfg.seed(), 5u);
  EXPECT_EQ(cfg.simulation.world.seed, 5u);
  EXPECT_DOUBLE_EQ(cfg.simulation.detector.scale_bias, 0.2);
  EXPECT_EQ(cfg.simulation.self_train.iterations, 10);
  EXPECT_EQ(cfg.initial_correction(), (ParamVector{0.1, -0.1}));
  EXPECT_EQ(io::parse_run_config("{}", "c").initial_correction(),
            exact_correction(SimulationConfig{}.detector, 0.0));
}

TEST(RunConfig, StrictKeysAndTypes) {
  auto message = [](const std::string& text) -> std::string {
    try {
      io::parse_run_config(text, "cfg.json");
    } catch (const ConfigError& e) {
      return e.what();
    }
    return {};
  };
  EXPECT_NE(message(R"({"detector": {"scale_bais": 0.2}})").find("detector.scale_bais"), std::string::npos);
  EXPECT_NE(message(R"({"sed": 1})").find("sed"), std::string::npos);
  EXPECT_NE(message(R"({"self_train": {"iterations": "many"}})").find("self_train.iterations"), std::string::npos);
  EXPECT_NE(message(R"({"self_train": {"momentum": 1.5}})"), "");
  EXPECT_NE(message("[1, 2]"), "");
  EXPECT_NE(message("{"), "");
  EXPECT_THROW(io::load_run_config("/nonexistent/c.json"), ConfigError);
}

TEST(RunConfig, ShippedConfigsLoad) {
  for (const char* name : {"ablation.json", "self_train.json"})
    EXPECT_NO_THROW(io::load_run_config(fs::path(DETADAPT_CONFIG_DIR) / name)) << name;
}

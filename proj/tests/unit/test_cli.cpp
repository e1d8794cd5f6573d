#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "detadapt/io/coco.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code = 0;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "detadapt");
  std::vector<char*> argv;
  for (std::string& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = detadapt::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("detadapt_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
    write("gt.json", R"({
      "images": [{"id": 1, "width": 100, "height": 100}, {"id": 2, "width": 200, "height": 100}],
      "categories": [{"id": 1, "name": "car"}, {"id": 2, "name": "person"}],
      "annotations": [{"image_id": 1, "category_id": 1, "bbox": [10, 10, 40, 40]},
                      {"image_id": 2, "category_id": 2, "bbox": [100, 20, 50, 60]}]})");
    write("a.json", R"([{"image_id": 1, "category_id": 1, "bbox": [10, 10, 40, 40], "score": 0.9},
                        {"image_id": 1, "category_id": 1, "bbox": [12, 10, 40, 40], "score": 0.8},
                        {"image_id": 2, "category_id": 2, "bbox": [100, 20, 50, 60], "score": 0.6},
                        {"image_id": 2, "category_id": 1, "bbox": [0, 0, 20, 20], "score": 0.3}])");
    write("b.json", R"([{"image_id": 1, "category_id": 1, "bbox": [11, 11, 40, 40], "score": 0.7}])");
    write("priors.json", R"({"1": [1], "2": [2]})");
    write("small.json", R"({"seed": 3, "world": {"image_size": [96, 64]},
      "self_train": {"iterations": 4, "batch_size": 4},
      "simulation": {"source_scenes": 8, "aux_scenes": 8, "target_scenes": 8, "bank_size": 8,
                     "stage1_iterations": 3, "stage2_iterations": 3, "batch_size": 4}})");
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  void write(const std::string& name, const std::string& text) const { detadapt::io::write_file(dir_ / name, text); }
  json read_json(const std::string& name) const { return json::parse(detadapt::io::read_file(dir_ / name)); }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, EvaluatePerfectDetections) {
  write("perfect.json", R"([{"image_id": 1, "category_id": 1, "bbox": [10, 10, 40, 40], "score": 0.9},
                            {"image_id": 2, "category_id": 2, "bbox": [100, 20, 50, 60], "score": 0.6}])");
  const Result r = run_cli({"evaluate", "--gt", path("gt.json"), "--dets", path("perfect.json"), "--out", path("r.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("car"), std::string::npos);
  EXPECT_DOUBLE_EQ(read_json("r.json")["map50"].get<double>(), 1.0);
}

TEST_F(Cli, EvaluateElevenPoint) {
  const Result r = run_cli({"evaluate", "--gt", path("gt.json"), "--dets", path("a.json"), "--interp", "11pt"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(run_cli({"evaluate", "--gt", path("gt.json"), "--dets", path("a.json"), "--interp", "5pt"}).code, 1);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run_cli({}).code, 1);
  EXPECT_EQ(run_cli({"bogus"}).code, 1);
  EXPECT_EQ(run_cli({"evaluate", "--gt", path("gt.json")}).code, 1);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
  write("bad.json", R"([{"image_id": 9, "category_id": 1, "bbox": [1, 1, 2, 2], "score": 0.5}])");
  const Result r = run_cli({"evaluate", "--gt", path("gt.json"), "--dets", path("bad.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("record 0"), std::string::npos) << r.err;
  EXPECT_EQ(run_cli({"evaluate", "--gt", path("missing.json"), "--dets", path("a.json")}).code, 2);
  EXPECT_EQ(run_cli({"simulate", "--config", path("gt.json")}).code, 1);
}

TEST_F(Cli, FuseTwoSources) {
  const Result r = run_cli({"fuse", "--gt", path("gt.json"), "--dets", path("a.json"), path("b.json"), "--out", path("f.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("warning"), std::string::npos);
  const json fused = read_json("f.json");
  ASSERT_FALSE(fused.empty());
  EXPECT_EQ(fused[0]["image_id"], 1);
  EXPECT_EQ(run_cli({"fuse", "--gt", path("gt.json"), "--dets", path("a.json"), path("b.json"), "--weights", "1"}).code, 1);
  EXPECT_EQ(run_cli({"fuse", "--dets", path("a.json"), path("b.json"), "--weights", "2,1", "--no-rescale"}).code, 0);
}

TEST_F(Cli, NmsSuppressesDuplicate) {
  const Result r = run_cli({"nms", "--gt", path("gt.json"), "--dets", path("a.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out).size(), 3u);
}

TEST_F(Cli, FilterByPriorAndScore) {
  const Result r = run_cli({"filter", "--dets", path("a.json"), "--priors", path("priors.json"), "--score-thr", "0.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json kept = json::parse(r.out);
  EXPECT_EQ(kept.size(), 3u);
  for (const json& d : kept) EXPECT_GE(d["score"].get<double>(), 0.5);
}

TEST_F(Cli, TtaMergeIdentityView) {
  const Result r = run_cli({"tta-merge", "--gt", path("gt.json"), "--views", path("b.json") + ":id"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json merged = json::parse(r.out);
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_NEAR(merged[0]["bbox"][0].get<double>(), 11.0, 1e-6);
  EXPECT_EQ(run_cli({"tta-merge", "--views", path("b.json") + ":id"}).code, 1);
  EXPECT_EQ(run_cli({"tta-merge", "--gt", path("gt.json"), "--views", path("b.json") + ":h7x"}).code, 1);
}

TEST_F(Cli, SimulateIsDeterministicAndSeedable) {
  ASSERT_EQ(run_cli({"simulate", "--config", path("small.json"), "--tta", "--out", path("s1.json")}).code, 0);
  ASSERT_EQ(run_cli({"simulate", "--config", path("small.json"), "--tta", "--out", path("s2.json")}).code, 0);
  EXPECT_EQ(detadapt::io::read_file(dir_ / "s1.json"), detadapt::io::read_file(dir_ / "s2.json"));
  ASSERT_EQ(run_cli({"--seed", "4", "simulate", "--config", path("small.json"), "--out", path("s3.json")}).code, 0);
  EXPECT_EQ(read_json("s3.json")["seed"], 4);
  EXPECT_EQ(read_json("s1.json")["rows"].size(), 5u);
  EXPECT_EQ(run_cli({"simulate", "--config", path("small.json"), "--stages", "S2"}).code, 1);
}

TEST_F(Cli, SelfTrainWritesLog) {
  const Result r = run_cli({"self-train", "--config", path("small.json"), "--out", path("t.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("|c - c*|"), std::string::npos);
  const json doc = read_json("t.json");
  EXPECT_EQ(doc["log"].size(), 5u);
  EXPECT_EQ(doc["parameters"].size(), 2u);
}

TEST_F(Cli, ShippedConfigsParse) {
  // Parsing only; the full runs are exercised by the acceptance check.
  write("bad_stage.json", R"({"simulation": {"stages": "S9"}})");
  EXPECT_EQ(run_cli({"simulate", "--config", path("bad_stage.json")}).code, 1);
  EXPECT_TRUE(fs::exists(fs::path(DETADAPT_CONFIG_DIR) / "ablation.json"));
}

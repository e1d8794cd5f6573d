#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "detadapt/error.hpp"
#include "detadapt/eval.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace detadapt;

namespace {

const BBox kGt{0.2, 0.2, 0.6, 0.6};
const BBox kFar{0.7, 0.7, 0.9, 0.9};

std::vector<ImageId> ids(int n) {
  std::vector<ImageId> out;
  for (int i = 0; i < n; ++i) out.push_back(i);
  return out;
}

struct Instance {
  std::vector<ImageDetection> dets;
  std::vector<GroundTruthBox> gts;
};

Instance random_instance(std::mt19937_64& rng, int images, int categories, int max_dets, int max_gts) {
  std::uniform_int_distribution<int> img(0, images - 1), cat(0, categories - 1), nd(0, max_dets), ng(0, max_gts);
  std::uniform_int_distribution<int> coarse(1, 5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Instance inst;
  const int g = ng(rng);
  for (int i = 0; i < g; ++i) inst.gts.push_back({img(rng), testgen::grid_box(rng, 4), cat(rng)});
  const int d = nd(rng);
  for (int i = 0; i < d; ++i) {
    BBox b = testgen::grid_box(rng, 4);
    if (!inst.gts.empty() && u(rng) < 0.6) b = testgen::jitter(rng, inst.gts[i % inst.gts.size()].box, 0.1);
    inst.dets.push_back({img(rng), {b, cat(rng), u(rng) < 0.3 ? coarse(rng) / 5.0 : u(rng)}});
  }
  return inst;
}

}  // namespace

TEST(GreedyMatch, SingleMatchAboveThreshold) {
  const BBox d{0.2, 0.2, 0.6, 0.52};  // IoU 0.8
  const std::vector<Detection> dets{{d, 0, 0.9}};
  const std::vector<BBox> gts{kGt};
  EXPECT_EQ(greedy_match(dets, gts, 0.5), (std::vector<bool>{true}));
}

TEST(GreedyMatch, OneToOne) {
  const std::vector<Detection> dets{{{0.2, 0.2, 0.6, 0.55}, 0, 0.6}, {{0.2, 0.2, 0.6, 0.58}, 0, 0.9}};
  const std::vector<BBox> gts{kGt};
  EXPECT_EQ(greedy_match(dets, gts, 0.5), (std::vector<bool>{false, true}));
}

TEST(GreedyMatch, NoGroundTruthMeansAllFalsePositives) {
  const std::vector<Detection> dets{{kGt, 0, 0.6}, {kFar, 0, 0.5}};
  EXPECT_EQ(greedy_match(dets, {}, 0.5), (std::vector<bool>{false, false}));
}

TEST(GreedyMatch, BoundaryIouCounts) {
  const std::vector<Detection> dets{{{0, 0, 0.5, 1}, 0, 0.9}};
  const std::vector<BBox> gts{{0, 0, 1, 1}};
  EXPECT_EQ(greedy_match(dets, gts, 0.5), (std::vector<bool>{true}));
}

TEST(AveragePrecision, HandExamples) {
  EXPECT_EQ(average_precision({true}, 1), 1.0);
  EXPECT_EQ(average_precision({false, true}, 1), 0.5);
  EXPECT_EQ(average_precision({true, false}, 1), 1.0);
  EXPECT_EQ(average_precision({}, 0), 0.0);
  EXPECT_EQ(average_precision({true}, 0), 0.0);
  EXPECT_EQ(average_precision({}, 3), 0.0);
}

TEST(AveragePrecision, ElevenPoint) {
  EXPECT_NEAR(average_precision({true}, 1, Interpolation::eleven_point), 1.0, 1e-15);
  EXPECT_NEAR(average_precision({false, true}, 1, Interpolation::eleven_point), 0.5, 1e-15);
  // Recall 0.5 at precision 1, nothing beyond: 6 of 11 points.
  EXPECT_NEAR(average_precision({true}, 2, Interpolation::eleven_point), 6.0 / 11.0, 1e-15);
}

TEST(AveragePrecision, MatchesBruteForceIntegrator) {
  std::mt19937_64 rng(81);
  std::uniform_int_distribution<int> len(0, 12), gt(1, 6);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 3000; ++trial) {
    const int num_gt = gt(rng);
    std::vector<bool> flags;
    int tp = 0;
    for (int i = len(rng); i > 0; --i) {
      const bool hit = tp < num_gt && coin(rng);
      tp += hit;
      flags.push_back(hit);
    }
    ASSERT_NEAR(average_precision(flags, num_gt), oracle::average_precision(flags, num_gt), 1e-12);
    ASSERT_NEAR(average_precision(flags, num_gt, Interpolation::eleven_point),
                oracle::average_precision_11pt(flags, num_gt), 1e-12);
  }
}

TEST(AveragePrecision, MonotoneAndBounded) {
  std::mt19937_64 rng(82);
  std::uniform_int_distribution<int> len(1, 12);
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<bool> flags;
    for (int i = len(rng); i > 0; --i) flags.push_back(coin(rng));
    const int tp = static_cast<int>(std::count(flags.begin(), flags.end(), true));
    const int num_gt = tp + 1;
    const double ap = average_precision(flags, num_gt);
    ASSERT_GE(ap, 0.0);
    ASSERT_LE(ap, 1.0);
    for (std::size_t i = 0; i < flags.size(); ++i) {
      if (flags[i]) continue;
      auto better = flags;
      better[i] = true;
      ASSERT_GE(average_precision(better, num_gt), ap - 1e-15);
    }
    auto worse = flags;
    worse.push_back(false);
    ASSERT_LE(average_precision(worse, num_gt), ap + 1e-15);
  }
}

TEST(Evaluate, PerfectDetectionsScoreOne) {
  const std::vector<GroundTruthBox> gts{{0, kGt, 0}, {0, kFar, 1}, {1, kGt, 1}};
  std::vector<ImageDetection> dets;
  for (const auto& g : gts) dets.push_back({g.image_id, {g.box, g.category, 1.0}});
  const auto r = evaluate(dets, gts, ids(2), 3);
  EXPECT_EQ(r.map50, 1.0);
  EXPECT_EQ(r.classes_with_gt, 2);
}

TEST(Evaluate, NoDetectionsScoreZero) {
  const std::vector<GroundTruthBox> gts{{0, kGt, 0}};
  EXPECT_EQ(evaluate({}, gts, ids(1), 1).map50, 0.0);
  EXPECT_EQ(evaluate({}, {}, ids(1), 1).map50, 0.0);
}

TEST(Evaluate, TwoClassComposite) {
  const std::vector<GroundTruthBox> gts{{0, kGt, 0}, {0, kGt, 1}};
  const std::vector<ImageDetection> dets{{0, {kGt, 0, 0.9}}, {0, {kFar, 1, 0.9}}, {0, {kGt, 1, 0.8}}};
  const auto r = evaluate(dets, gts, ids(1), 2);
  EXPECT_EQ(r.classes[0].ap, 1.0);
  EXPECT_EQ(r.classes[1].ap, 0.5);
  EXPECT_EQ(r.map50, 0.75);
}

TEST(Evaluate, DetectionsWithoutGroundTruthAreFlagged) {
  const std::vector<GroundTruthBox> gts{{0, kGt, 0}};
  const std::vector<ImageDetection> dets{{0, {kGt, 0, 0.9}}, {0, {kFar, 2, 0.9}}};
  const auto r = evaluate(dets, gts, ids(1), 3);
  EXPECT_TRUE(r.classes[2].detections_without_gt);
  EXPECT_EQ(r.classes[2].ap, 0.0);
  EXPECT_EQ(r.map50, 1.0);
  EXPECT_NE(r.to_text().find("no ground truth"), std::string::npos);
}

TEST(Evaluate, UnknownImageOrCategoryIsADataError) {
  const std::vector<ImageDetection> stray{{5, {kGt, 0, 0.9}}};
  EXPECT_THROW(evaluate(stray, {}, ids(1), 1), DataError);
  const std::vector<ImageDetection> bad_cat{{0, {kGt, 4, 0.9}}};
  EXPECT_THROW(evaluate(bad_cat, {}, ids(1), 2), DataError);
  const std::vector<GroundTruthBox> bad_gt{{3, kGt, 0}};
  EXPECT_THROW(evaluate({}, bad_gt, ids(1), 1), DataError);
}

TEST(Evaluate, InvariantToInputOrder) {
  std::mt19937_64 rng(83);
  for (int trial = 0; trial < 300; ++trial) {
    Instance inst = random_instance(rng, 3, 3, 15, 6);
    const double a = evaluate(inst.dets, inst.gts, ids(3), 3).map50;
    std::shuffle(inst.dets.begin(), inst.dets.end(), rng);
    std::shuffle(inst.gts.begin(), inst.gts.end(), rng);
    ASSERT_EQ(evaluate(inst.dets, inst.gts, ids(3), 3).map50, a);
  }
}

TEST(Evaluate, MatchesBruteForceEvaluator) {
  std::mt19937_64 rng(84);
  for (int trial = 0; trial < 1000; ++trial) {
    const Instance inst = random_instance(rng, 2, 2, 5, 3);
    ASSERT_NEAR(evaluate(inst.dets, inst.gts, ids(2), 2).map50, oracle::map50(inst.dets, inst.gts, 2), 1e-9);
    EvalOptions opts{0.5, Interpolation::eleven_point};
    ASSERT_NEAR(evaluate(inst.dets, inst.gts, ids(2), 2, opts).map50, oracle::map50(inst.dets, inst.gts, 2, 0.5, true), 1e-9);
  }
}

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "detadapt/error.hpp"
#include "detadapt/pseudo_label.hpp"
#include "generators.hpp"

using namespace detadapt;

namespace {

constexpr int kCar = 0;
constexpr int kBus = 1;

Detection det(int category, double score) { return {{0.1, 0.1, 0.3, 0.3}, category, score}; }

ClassPrior prior_of(std::set<int> cats) { return {0, std::move(cats)}; }

std::vector<Detection> random_dets(std::mt19937_64& rng) {
  return testgen::clustered(rng, 12, 4, {{0.1, 0.1, 0.4, 0.4}, {0.5, 0.5, 0.9, 0.8}});
}

bool is_subsequence(const std::vector<Detection>& small, const std::vector<Detection>& big) {
  std::size_t j = 0;
  for (const Detection& d : big)
    if (j < small.size() && small[j] == d) ++j;
  return j == small.size();
}

}  // namespace

TEST(FilterByPrior, KeepsOnlyListedClasses) {
  const std::vector<Detection> d{det(kCar, 0.8), det(kBus, 0.9)};
  EXPECT_EQ(filter_by_prior(d, prior_of({kCar})), (std::vector<Detection>{det(kCar, 0.8)}));
}

TEST(FilterByPrior, FullPriorIsANoOp) {
  const std::vector<Detection> d{det(kCar, 0.8), det(kBus, 0.9), det(2, 0.1)};
  EXPECT_EQ(filter_by_prior(d, prior_of({0, 1, 2})), d);
  EXPECT_TRUE(filter_by_prior({}, prior_of({0})).empty());
}

TEST(FilterByScore, BoundaryIsInclusive) {
  const std::vector<Detection> d{det(0, 0.8), det(0, 0.5), det(0, 0.3)};
  EXPECT_EQ(filter_by_score(d, 0.5), (std::vector<Detection>{det(0, 0.8), det(0, 0.5)}));
  EXPECT_EQ(filter_by_score(d, 0.0), d);
  EXPECT_TRUE(filter_by_score(d, 1.0).empty());
}

TEST(GeneratePseudoLabels, AppliesBothFilters) {
  const std::vector<Detection> d{det(kCar, 0.9), det(kCar, 0.4), det(kBus, 0.95)};
  const ClassPrior p = prior_of({kCar});
  EXPECT_EQ(generate_pseudo_labels(d, &p, {0.5, true}), (std::vector<Detection>{det(kCar, 0.9)}));
}

TEST(GeneratePseudoLabels, NoPriorMeansScoreOnly) {
  const std::vector<Detection> d{det(kCar, 0.9), det(kCar, 0.4), det(kBus, 0.95)};
  EXPECT_EQ(generate_pseudo_labels(d, nullptr, {0.5, true}), (std::vector<Detection>{det(kCar, 0.9), det(kBus, 0.95)}));
  const ClassPrior p = prior_of({kCar});
  EXPECT_EQ(generate_pseudo_labels(d, &p, {0.5, false}).size(), 2u);
}

TEST(GeneratePseudoLabels, AllBelowThresholdGivesNothing) {
  const std::vector<Detection> d{det(kCar, 0.2), det(kBus, 0.1)};
  EXPECT_TRUE(generate_pseudo_labels(d, nullptr, PseudoLabelConfig::test_time()).empty());
}

TEST(PseudoLabelConfig, DefaultsAndValidation) {
  EXPECT_EQ(PseudoLabelConfig::weakly_supervised().score_threshold, 0.5);
  EXPECT_TRUE(PseudoLabelConfig::weakly_supervised().use_class_prior);
  EXPECT_EQ(PseudoLabelConfig::test_time().score_threshold, 0.7);
  EXPECT_FALSE(PseudoLabelConfig::test_time().use_class_prior);
  EXPECT_THROW((PseudoLabelConfig{1.5, true}).validate(), ConfigError);
  EXPECT_THROW((PseudoLabelConfig{-0.1, true}).validate(), ConfigError);
}

TEST(ClassPrior, Validation) {
  EXPECT_THROW(prior_of({}).validate(3), ConfigError);
  EXPECT_THROW(prior_of({3}).validate(3), ConfigError);
  EXPECT_NO_THROW(prior_of({0, 2}).validate(3));
}

TEST(FilterLaws, MonotoneSoundIdempotentAndOrderFree) {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> cat(0, 3);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto d = random_dets(rng);
    double t1 = u(rng), t2 = u(rng);
    if (t1 > t2) std::swap(t1, t2);
    const auto hi = filter_by_score(d, t2), lo = filter_by_score(d, t1);
    ASSERT_TRUE(is_subsequence(hi, lo));
    ASSERT_EQ(filter_by_score(hi, t2), hi);

    ClassPrior p = prior_of({cat(rng)});
    p.categories.insert(cat(rng));
    const auto kept = filter_by_prior(d, p);
    for (const Detection& k : kept) ASSERT_TRUE(p.admits(k.category));
    ASSERT_TRUE(is_subsequence(kept, d));
    ASSERT_EQ(filter_by_prior(kept, p), kept);
    ASSERT_EQ(filter_by_score(filter_by_prior(d, p), t1), filter_by_prior(filter_by_score(d, t1), p));
  }
}

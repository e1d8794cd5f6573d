#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "detadapt/ema.hpp"
#include "detadapt/error.hpp"

using namespace detadapt;

TEST(ParamVector, RejectsNonFiniteEntries) {
  EXPECT_THROW(ParamVector({1.0, NAN}), DataError);
  EXPECT_THROW(ParamVector(2, INFINITY), DataError);
  ParamVector v(2);
  EXPECT_THROW(v.set(0, NAN), DataError);
  EXPECT_EQ(v.size(), 2u);
}

TEST(ParamVector, Distance) { EXPECT_DOUBLE_EQ(distance({0, 0}, {3, 4}), 5.0); }

TEST(Ema, FirstStepsOfConstantStudent) {
  EmaState s = EmaState::from_student(ParamVector{0.0}, 0.9);
  s = ema_update(s, ParamVector{1.0});
  EXPECT_NEAR(s.teacher[0], 0.1, 1e-15);
  s = ema_update(s, ParamVector{1.0});
  EXPECT_NEAR(s.teacher[0], 0.19, 1e-15);
  EXPECT_EQ(s.step, 2u);
  for (int i = 0; i < 500; ++i) s = ema_update(s, ParamVector{1.0});
  EXPECT_NEAR(s.teacher[0], 1.0, 1e-12);
}

TEST(Ema, StudentEqualToTeacherIsAFixedPoint) {
  const EmaState s = EmaState::from_student(ParamVector{0.3, -0.2}, 0.999);
  EXPECT_EQ(ema_update(s, ParamVector{0.3, -0.2}).teacher, s.teacher);
}

TEST(Ema, ZeroMomentumCopiesStudent) {
  const EmaState s = EmaState::from_student(ParamVector{5.0, 6.0}, 0.0);
  EXPECT_EQ(ema_update(s, ParamVector{0.25, -1.5}).teacher, (ParamVector{0.25, -1.5}));
}

TEST(Ema, Errors) {
  const EmaState s = EmaState::from_student(ParamVector{0.0, 0.0}, 0.9);
  EXPECT_THROW(ema_update(s, ParamVector{1.0}), ConfigError);
  EmaState bad = s;
  bad.momentum = 1.0;
  EXPECT_THROW(ema_update(bad, ParamVector{1.0, 1.0}), ConfigError);
  bad.momentum = -0.1;
  EXPECT_THROW(ema_update(bad, ParamVector{1.0, 1.0}), ConfigError);
}

TEST(Ema, ClosedForm) {
  for (double m : {0.0, 0.5, 0.9, 0.999}) {
    EmaState s = EmaState::from_student(ParamVector{2.0}, m);
    for (int t = 1; t <= 1000; ++t) {
      s = ema_update(s, ParamVector{-1.0});
      ASSERT_NEAR(s.teacher[0], -1.0 + 3.0 * std::pow(m, t), 1e-12) << "m=" << m << " t=" << t;
    }
  }
}

TEST(Ema, UpdateIsConvexCombination) {
  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> u(-5, 5), m(0, 0.999);
  for (int i = 0; i < 2000; ++i) {
    const ParamVector teacher{u(rng), u(rng)}, student{u(rng), u(rng)};
    EmaState s{teacher, m(rng), 0};
    const auto next = ema_update(s, student).teacher;
    for (std::size_t k = 0; k < 2; ++k) {
      ASSERT_GE(next[k], std::min(teacher[k], student[k]) - 1e-12);
      ASSERT_LE(next[k], std::max(teacher[k], student[k]) + 1e-12);
    }
  }
}

TEST(Ema, CommutesWithAffineMaps) {
  std::mt19937_64 rng(72);
  std::uniform_real_distribution<double> u(-5, 5), m(0, 0.999);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(rng), b = u(rng), t = u(rng), s = u(rng), mom = m(rng);
    const double direct = ema_update({ParamVector{t}, mom, 0}, ParamVector{s}).teacher[0];
    const double mapped = ema_update({ParamVector{a * t + b}, mom, 0}, ParamVector{a * s + b}).teacher[0];
    ASSERT_NEAR(mapped, a * direct + b, 1e-9);
  }
}

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "flowpersp/errors.hpp"
#include "flowpersp/robust_stats.hpp"

namespace flowpersp {
namespace {

std::vector<double> one_to(int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), 1.0);
  return v;
}

TEST(TrimSpec, PerTailUsesFloor) {
  const TrimSpec spec(0.15);
  EXPECT_EQ(spec.per_tail(10), 1u);
  EXPECT_EQ(spec.per_tail(6), 0u);
  EXPECT_EQ(spec.per_tail(7), 1u);
  EXPECT_EQ(spec.per_tail(100), 15u);
  EXPECT_EQ(TrimSpec(0.0).per_tail(1000), 0u);
}

TEST(TrimSpec, RejectsOutOfRange) {
  EXPECT_THROW(TrimSpec(0.5), ArgumentError);
  EXPECT_THROW(TrimSpec(-0.01), ArgumentError);
  EXPECT_NO_THROW(TrimSpec(0.49));
}

TEST(TrimmedMean, Singleton) {
  const std::vector<double> x{5.0};
  EXPECT_DOUBLE_EQ(trimmed_mean(x, TrimSpec(0.15)), 5.0);
}

TEST(TrimmedMean, OneToTen) {
  // floor(1.5) = 1 per tail, mean of 2..9
  EXPECT_DOUBLE_EQ(trimmed_mean(one_to(10), TrimSpec(0.15)), 5.5);
}

TEST(TrimmedMean, HandCases) {
  const std::vector<double> x{100.0, 1.0, 2.0, 3.0, -50.0};
  EXPECT_DOUBLE_EQ(trimmed_mean(x, TrimSpec(0.2)), 2.0);
  EXPECT_DOUBLE_EQ(trimmed_mean(x, TrimSpec(0.0)), 56.0 / 5.0);
  const std::vector<double> y{4.0, 4.0, 4.0};
  EXPECT_DOUBLE_EQ(trimmed_mean(y, TrimSpec(0.3)), 4.0);
}

TEST(TrimmedMean, EmptyIsInsufficient) {
  const std::vector<double> none;
  try {
    trimmed_mean(none);
    FAIL();
  } catch (const InsufficientDataError& e) {
    EXPECT_EQ(e.available(), 0u);
  }
}

TEST(TrimmedMean, PermutationInvariant) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(1 + trial % 37);
    for (auto& v : x) v = u(rng);
    const double ref = trimmed_mean(x);
    std::shuffle(x.begin(), x.end(), rng);
    EXPECT_EQ(trimmed_mean(x), ref);
  }
}

TEST(TrimmedMeanProperty, ShiftAndScaleEquivariance) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::uniform_real_distribution<double> pos(0.1, 10.0);
  std::uniform_real_distribution<double> trim(0.0, 0.45);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> x(3 + trial % 50);
    for (auto& v : x) v = u(rng);
    const TrimSpec spec(trim(rng));
    const double c = u(rng);
    const double k = pos(rng);
    std::vector<double> shifted(x);
    std::vector<double> scaled(x);
    for (auto& v : shifted) v += c;
    for (auto& v : scaled) v *= k;
    const double base = trimmed_mean(x, spec);
    EXPECT_NEAR(trimmed_mean(shifted, spec), base + c, 1e-12);
    EXPECT_NEAR(trimmed_mean(scaled, spec), k * base, 1e-12 * k);
  }
}

TEST(ScalarLsq, HandCases) {
  const std::vector<LsqPair> one{{1.0, 3.0}};
  EXPECT_DOUBLE_EQ(scalar_lsq(one), 3.0);
  const std::vector<LsqPair> two{{1.0, 0.1}, {1.0, 0.3}};
  EXPECT_DOUBLE_EQ(scalar_lsq(two), 0.2);
  const std::vector<LsqPair> single{{2.0, 0.1}};
  EXPECT_DOUBLE_EQ(scalar_lsq(single), 0.05);
  // (1*1 + 2*5) / (1 + 4)
  const std::vector<LsqPair> mixed{{1.0, 1.0}, {2.0, 5.0}};
  EXPECT_DOUBLE_EQ(scalar_lsq(mixed), 11.0 / 5.0);
}

TEST(ScalarLsq, DegenerateSystem) {
  const std::vector<LsqPair> zero{{0.0, 1.0}, {0.0, -2.0}};
  EXPECT_THROW(scalar_lsq(zero), DegenerateSystemError);
  EXPECT_THROW(scalar_lsq(std::vector<LsqPair>{}), DegenerateSystemError);
}

TEST(ScalarLsqProperty, ResidualIsMinimal) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<LsqPair> pairs(1 + trial % 20);
    for (auto& p : pairs) p = {u(rng), u(rng)};
    const double x = scalar_lsq(pairs);
    const double f = lsq_objective(pairs, x);
    EXPECT_GT(lsq_objective(pairs, x + 1e-3), f);
    EXPECT_GT(lsq_objective(pairs, x - 1e-3), f);
  }
}

using Samples = std::vector<std::optional<double>>;

TEST(CentralDiff, Constant) {
  const Samples s(6, 4.0);
  for (const auto& d : central_diff(s, 2.0)) {
    ASSERT_TRUE(d);
    EXPECT_EQ(*d, 0.0);
  }
}

TEST(CentralDiff, LinearGivesSlopeEverywhere) {
  Samples s;
  for (int k = 0; k < 7; ++k) s.push_back(1.0 + 0.75 * k * 3.0);
  for (const auto& d : central_diff(s, 3.0)) {
    ASSERT_TRUE(d);
    EXPECT_DOUBLE_EQ(*d, 0.75);
  }
}

TEST(CentralDiff, QuadraticExactAtInterior) {
  const double s = 0.5;
  Samples q;
  for (int k = 0; k < 9; ++k) {
    const double x = k * s;
    q.push_back(2.0 * x * x - x + 3.0);
  }
  const auto d = central_diff(q, s);
  for (int k = 1; k < 8; ++k) {
    ASSERT_TRUE(d[k]);
    EXPECT_NEAR(*d[k], 4.0 * k * s - 1.0, 1e-12);
  }
}

TEST(CentralDiff, GapsAndEdges) {
  const Samples s{1.0, std::nullopt, 5.0, 6.0, std::nullopt, 2.0};
  const auto d = central_diff(s, 1.0);
  EXPECT_FALSE(d[0]);  // isolated
  EXPECT_FALSE(d[1]);  // missing
  EXPECT_DOUBLE_EQ(*d[2], 1.0);  // one-sided forward
  EXPECT_DOUBLE_EQ(*d[3], 1.0);  // one-sided backward
  EXPECT_FALSE(d[4]);
  EXPECT_FALSE(d[5]);
}

TEST(CentralDiff, RejectsBadSpacing) {
  const Samples s{1.0, 2.0};
  EXPECT_THROW(central_diff(s, 0.0), ArgumentError);
}

TEST(CentralDiffProperty, AffineInputsExact) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  std::uniform_real_distribution<double> sp(0.25, 8.0);
  std::bernoulli_distribution hole(0.2);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = u(rng);
    const double k = u(rng);
    const double spacing = sp(rng);
    Samples s(2 + trial % 15);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!hole(rng)) s[i] = a + k * spacing * static_cast<double>(i);
    }
    const auto d = central_diff(s, spacing);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (d[i]) EXPECT_NEAR(*d[i], k, 1e-9);
    }
  }
}

}  // namespace
}  // namespace flowpersp

// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "cfmimo/error.hpp"
#include "cfmimo/wmmse.hpp"
#include "test_support.hpp"

using namespace cfmimo;
using cfmimo::testing::random_channel;

namespace {

// Best sum SE over power splits (p1, p2) with p1 + p2 <= p_max on a 0.001
// grid, matched-phase scalar beams, single AP with one antenna.
double two_user_grid_oracle(double g1, double g2, double p_max, double noise) {
  double best = 0.0;
  const int steps = static_cast<int>(std::lround(p_max / 0.001));
  for (int a = 0; a <= steps; ++a) {
    for (int b = 0; a + b <= steps; ++b) {
      const double p1 = a * 0.001, p2 = b * 0.001;
      const double s = std::log2(1.0 + p1 * g1 * g1 / (p2 * g1 * g1 + noise)) +
                       std::log2(1.0 + p2 * g2 * g2 / (p1 * g2 * g2 + noise));
      best = std::max(best, s);
    }
  }
  return best;
}

}  // namespace

TEST(Wmmse, SingleUserClosedForm) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CounterRng rng(seed);
    auto h = random_channel(1, 1, 4, rng);
    double n2 = 0.0;
    for (auto z : h.gains()) n2 += std::norm(z);
    auto r = wmmse_solve(h, 2.0, 0.5);
    EXPECT_NEAR(r.trace.back(), std::log2(1.0 + 2.0 * n2 / 0.5), 1e-6);
    EXPECT_NEAR(per_ap_power(r.precoder)[0], 2.0, 2e-6);
  }
}

TEST(Wmmse, TwoUserScalarGridOracle) {
  ChannelTensor h(1, 2, 1);
  h(0, 0, 0) = 1.0;
  h(0, 1, 0) = 0.5;
  WmmseOptions o;
  o.tolerance = 1e-10;
  auto r = wmmse_solve(h, 1.0, 1.0, o);
  EXPECT_NEAR(r.trace.back(), two_user_grid_oracle(1.0, 0.5, 1.0, 1.0), 0.01);
}

TEST(Wmmse, RandomScalarInstancesNearGrid) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CounterRng rng(seed + 100);
    const double g1 = 0.2 + 2.0 * rng.uniform(), g2 = 0.2 + 2.0 * rng.uniform();
    ChannelTensor h(1, 2, 1);
    h(0, 0, 0) = g1;
    h(0, 1, 0) = g2;
    WmmseOptions o;
    o.tolerance = 1e-10;
    const double got = wmmse_solve(h, 1.0, 0.5, o).trace.back();
    const double want = two_user_grid_oracle(g1, g2, 1.0, 0.5);
    EXPECT_GE(got, 0.99 * want) << "seed " << seed;
  }
}

TEST(Wmmse, MonotoneAndFeasible) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CounterRng rng(seed);
    auto h = random_channel(3, 4, 2, rng);
    auto r = wmmse_solve(h, 1.0, 0.1);
    for (std::size_t i = 1; i < r.trace.size(); ++i) {
      EXPECT_GE(r.trace[i], r.trace[i - 1] - 1e-9) << "seed " << seed << " iter " << i;
    }
    EXPECT_TRUE(power_feasible(r.precoder, 1.0, 1e-6));
    EXPECT_EQ(r.trace.size(), r.iterations + 1);
    EXPECT_NEAR(r.trace.back(), sum_se(h, r.precoder, 0.1).sum_se, 1e-9);
  }
}

TEST(Wmmse, InitializationIndependenceSmallScale) {
  // Noise-limited two-user instance: the optimum is unique and every start
  // reaches it.
  ChannelTensor h(1, 2, 1);
  h(0, 0, 0) = {0.8, 0.3};
  h(0, 1, 0) = {-0.2, 0.9};
  std::vector<double> finals;
  for (std::uint64_t s = 0; s < 10; ++s) {
    WmmseOptions o;
    o.init = WmmseInit::kRandom;
    o.seed = s;
    o.tolerance = 1e-10;
    finals.push_back(wmmse_solve(h, 1.0, 5.0, o).trace.back());
  }
  const auto [lo, hi] = std::minmax_element(finals.begin(), finals.end());
  EXPECT_LT((*hi - *lo) / *hi, 0.01);
}

TEST(Wmmse, InterferenceLimitedScalarCaseIsBimodal) {
  // Same channel at low noise: serving either user alone is a local
  // optimum, and random starts split between the two corners.
  ChannelTensor h(1, 2, 1);
  h(0, 0, 0) = {0.8, 0.3};
  h(0, 1, 0) = {-0.2, 0.9};
  const double only1 = std::log2(1.0 + std::norm(h(0, 0, 0)) / 0.2);
  const double only2 = std::log2(1.0 + std::norm(h(0, 1, 0)) / 0.2);
  for (std::uint64_t s = 0; s < 10; ++s) {
    WmmseOptions o;
    o.init = WmmseInit::kRandom;
    o.seed = s;
    o.tolerance = 1e-10;
    const double v = wmmse_solve(h, 1.0, 0.2, o).trace.back();
    EXPECT_TRUE(std::abs(v - only1) < 1e-6 || std::abs(v - only2) < 1e-6) << v;
  }
  // the default start finds the better corner, which is the grid optimum
  EXPECT_NEAR(wmmse_solve(h, 1.0, 0.2).trace.back(), std::max(only1, only2), 1e-6);
}

TEST(Wmmse, BeatsMaximumRatio) {
  CounterRng rng(4);
  auto h = random_channel(2, 4, 4, rng);
  const double mr = sum_se(h, scaled_conjugate_precoder(h, 1.0), 0.05).sum_se;
  EXPECT_GT(wmmse_solve(h, 1.0, 0.05).trace.back(), mr);
}

TEST(Wmmse, ScaledConjugateSpendsFullBudget) {
  CounterRng rng(5);
  auto f = scaled_conjugate_precoder(random_channel(3, 2, 2, rng), 4.0);
  for (double p : per_ap_power(f)) EXPECT_NEAR(p, 4.0, 1e-12);
}

TEST(Wmmse, Preconditions) {
  CounterRng rng(6);
  auto h = random_channel(1, 2, 2, rng);
  WmmseOptions o;
  o.max_iters = 0;
  EXPECT_THROW(wmmse_solve(h, 1.0, 1.0, o), ConfigError);
  EXPECT_THROW(wmmse_solve(h, 0.0, 1.0), DomainError);
  h(0, 1, 1) = {std::nan(""), 0.0};
  EXPECT_THROW(wmmse_solve(h, 1.0, 1.0), DomainError);
}

TEST(Wmmse, Deterministic) {
  CounterRng rng(2);
  auto h = random_channel(2, 3, 2, rng);
  auto a = wmmse_solve(h, 1.0, 0.1);
  auto b = wmmse_solve(h, 1.0, 0.1);
  EXPECT_EQ(a.trace, b.trace);
}

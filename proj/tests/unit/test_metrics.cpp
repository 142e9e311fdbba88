// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "cfmimo/error.hpp"
#include "cfmimo/metrics.hpp"
#include "test_support.hpp"

using namespace cfmimo;

namespace {

PrecoderTensor random_precoder(std::size_t L, std::size_t K, std::size_t N, CounterRng& rng) {
  PrecoderTensor f(L, K, N, 1.0);
  for (auto& z : f.entries()) z = rng.complex_normal();
  return f;
}

}  // namespace

TEST(Sinr, SingleLinkNoInterference) {
  ChannelTensor h(1, 1, 1);
  h(0, 0, 0) = 1.0;
  PrecoderTensor f(1, 1, 1, 1.0);
  f(0, 0, 0) = 1.0;
  EXPECT_DOUBLE_EQ(sinr(h, f, 1.0)[0], 1.0);
  auto r = sum_se(h, f, 1.0);
  EXPECT_DOUBLE_EQ(r.se[0], 1.0);
  EXPECT_DOUBLE_EQ(r.sum_se, 1.0);
}

TEST(Sinr, ZeroPrecoder) {
  CounterRng rng(1);
  auto h = cfmimo::testing::random_channel(2, 3, 2, rng);
  PrecoderTensor f(2, 3, 2, 1.0);
  for (double s : sinr(h, f, 0.5)) EXPECT_EQ(s, 0.0);
  EXPECT_EQ(sum_se(h, f, 0.5).sum_se, 0.0);
}

TEST(Sinr, TwoUsersEqualChannels) {
  ChannelTensor h(1, 2, 1);
  h(0, 0, 0) = 1.0;
  h(0, 1, 0) = 1.0;
  PrecoderTensor f(1, 2, 1, 2.0);
  f(0, 0, 0) = 1.0;
  f(0, 1, 0) = 1.0;
  auto s = sinr(h, f, 1.0);
  EXPECT_DOUBLE_EQ(s[0], 0.5);
  EXPECT_DOUBLE_EQ(s[1], 0.5);
  EXPECT_NEAR(sum_se(h, f, 1.0).se[0], std::log2(1.5), 1e-15);
  EXPECT_NEAR(std::log2(1.5), 0.585, 1e-3);
}

TEST(Sinr, MatchesDirectFormula) {
  CounterRng rng(7);
  const std::size_t L = 3, K = 2, N = 2;
  auto h = cfmimo::testing::random_channel(L, K, N, rng);
  auto f = random_precoder(L, K, N, rng);
  auto s = sinr(h, f, 0.3);
  for (std::size_t k = 0; k < K; ++k) {
    double num = 0.0, den = 0.3;
    for (std::size_t i = 0; i < K; ++i) {
      cdouble g = 0.0;
      for (std::size_t j = 0; j < L; ++j)
        for (std::size_t n = 0; n < N; ++n) g += std::conj(h(j, k, n)) * f(j, i, n);
      (i == k ? num : den) += std::norm(g);
    }
    EXPECT_NEAR(s[k], num / den, 1e-12 * (num / den));
  }
}

TEST(Sinr, RejectsMismatchAndBadNoise) {
  ChannelTensor h(1, 2, 1);
  EXPECT_THROW(sinr(h, PrecoderTensor(1, 3, 1, 1.0), 1.0), ShapeError);
  EXPECT_THROW(sinr(h, PrecoderTensor(1, 2, 1, 1.0), 0.0), DomainError);
}

TEST(Sinr, InvariantUnderCommonPhaseAndJointScaling) {
  CounterRng rng(8);
  auto h = cfmimo::testing::random_channel(2, 3, 2, rng);
  auto f = random_precoder(2, 3, 2, rng);
  auto base = sinr(h, f, 0.7);
  // A per-UE phase on every beam of UE i leaves all SINRs unchanged.
  auto g = f;
  for (std::size_t j = 0; j < 2; ++j)
    for (std::size_t n = 0; n < 2; ++n) g(j, 1, n) *= std::polar(1.0, 0.9);
  auto rotated = sinr(h, g, 0.7);
  // Scaling F by c and noise by c^2 keeps SINR fixed.
  auto scaled = f;
  for (auto& z : scaled.entries()) z *= 3.0;
  auto sc = sinr(h, scaled, 0.7 * 9.0);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(rotated[k], base[k], 1e-12 * base[k]);
    EXPECT_NEAR(sc[k], base[k], 1e-12 * base[k]);
  }
}

TEST(Sinr, UePermutationPermutesSe) {
  CounterRng rng(9);
  const std::size_t L = 2, K = 3, N = 2;
  auto h = cfmimo::testing::random_channel(L, K, N, rng);
  auto f = random_precoder(L, K, N, rng);
  const std::size_t perm[] = {2, 0, 1};
  ChannelTensor hp(L, K, N);
  PrecoderTensor fp(L, K, N, 1.0);
  for (std::size_t j = 0; j < L; ++j)
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t n = 0; n < N; ++n) {
        hp(j, k, n) = h(j, perm[k], n);
        fp(j, k, n) = f(j, perm[k], n);
      }
  auto a = sum_se(h, f, 1.0);
  auto b = sum_se(hp, fp, 1.0);
  for (std::size_t k = 0; k < K; ++k) EXPECT_NEAR(b.se[k], a.se[perm[k]], 1e-12);
}

TEST(Power, PerApExamples) {
  PrecoderTensor f(2, 1, 2, 1.0);
  for (double p : per_ap_power(f)) EXPECT_EQ(p, 0.0);
  f(0, 0, 0) = 1.0;
  f(1, 0, 1) = {0.0, 1.0};
  for (double p : per_ap_power(f)) EXPECT_DOUBLE_EQ(p, 1.0);
  EXPECT_TRUE(power_feasible(f, 1.0));
  f(1, 0, 0) = 0.01;
  EXPECT_FALSE(power_feasible(f, 1.0));
  EXPECT_NEAR(max_power_excess(f, 1.0), 1e-4, 1e-12);
}

TEST(Cdf, Examples) {
  std::vector<double> v{3, 1, 2};
  auto c = empirical_cdf(v);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_DOUBLE_EQ(cdf_at(c, 2.0), 2.0 / 3.0);
  EXPECT_EQ(cdf_at(c, 0.5), 0.0);
  EXPECT_EQ(cdf_at(c, 10.0), 1.0);
  std::vector<double> same{4, 4, 4};
  auto s = empirical_cdf(same);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].probability, 1.0);
  EXPECT_THROW(empirical_cdf(std::vector<double>{}), DomainError);
}

TEST(Cdf, DkwBoundOnUniformSample) {
  CounterRng rng(12);
  const int n = 5000;
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform();
  auto c = empirical_cdf(v);
  // Dvoretzky-Kiefer-Wolfowitz at 99.9% confidence.
  const double eps = std::sqrt(std::log(2.0 / 1e-3) / (2.0 * n));
  for (double x = 0.0; x <= 1.0; x += 0.01) EXPECT_LE(std::abs(cdf_at(c, x) - x), eps);
}

TEST(Summary, Percentiles) {
  std::vector<double> v(101);
  std::iota(v.begin(), v.end(), 0.0);
  auto s = summarize(v);
  EXPECT_EQ(s.count, 101u);
  EXPECT_DOUBLE_EQ(s.mean, 50.0);
  EXPECT_DOUBLE_EQ(s.median, 50.0);
  EXPECT_DOUBLE_EQ(s.p5, 5.0);
  EXPECT_NE(summary_json(s).find("\"p5\""), std::string::npos);
}

TEST(Cdf, CsvExport) {
  auto path = std::filesystem::temp_directory_path() / "cfmimo_test_cdf" / "c.csv";
  std::vector<double> v{1, 2};
  write_cdf_csv(path, empirical_cdf(v));
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "value,cdf");
  EXPECT_EQ(row, "1,0.5");
}

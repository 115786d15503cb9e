#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "qpool/estimators/analytic.hpp"
#include "qpool/estimators/convolution.hpp"

using namespace qpool;

namespace {

// Fraction of i.i.d. Exp(theta) sums of `terms` values that are <= C.
double mc_sum_cdf(int terms, double theta, double C, int n, std::uint64_t seed) {
  RngStream r(seed, 0);
  int below = 0;
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int m = 0; m < terms; ++m) s -= theta * std::log(r.uniform_positive());
    below += s <= C;
  }
  return static_cast<double>(below) / n;
}

// Brute-force recursion over all ordered m-tuples of grid-aligned values.
double brute_sum_cdf(const std::vector<std::size_t>& bins, std::size_t m, std::size_t limit) {
  const std::size_t N = bins.size();
  std::size_t hits = 0, total = 0;
  std::vector<std::size_t> idx(m, 0);
  for (;;) {
    std::size_t s = 0;
    for (auto i : idx) s += bins[i];
    hits += s <= limit;
    ++total;
    std::size_t p = 0;
    while (p < m && ++idx[p] == N) idx[p++] = 0;
    if (p == m) break;
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

Cohort exp_cohort(double theta, std::size_t N, std::uint64_t seed) {
  RngStream r(seed, 0);
  return Cohort(sample_exponential(theta, N, r));
}

}  // namespace

TEST(PhiMpAnalytic, Anchor) {
  const auto e = phi_mp_analytic(2, 400, 1000);
  EXPECT_NEAR(e.phi, 0.5 + 3.5 * std::exp(-2.5), 1e-12);
  EXPECT_NEAR(e.phi, 0.787297, 1e-6);
  EXPECT_NEAR(1.0 - e.phi, 0.21, 0.005);
  EXPECT_EQ(e.method, Method::analytic);
  EXPECT_EQ(e.K, 2u);
}

TEST(PhiMpAnalytic, LowPrevalenceLimit) { EXPECT_NEAR(phi_mp_analytic(4, 1e-3, 1000).phi, 0.25, 1e-12); }

TEST(PhiMpAnalytic, MatchesMonteCarloOracle) {
  const double mc = mc_sum_cdf(5, 700, 1000, 1000000, 1);
  const double se = std::sqrt(mc * (1 - mc) / 1e6);
  EXPECT_NEAR(phi_mp_analytic(5, 700, 1000).phi, 0.2 + (1.0 - mc), 4 * se);
}

TEST(PhiMpaAnalytic, Anchor) {
  const auto e = phi_mpa_analytic(3, 400, 1000);
  EXPECT_NEAR(e.phi, 1.0 - (0.456187 + 0.712703) / 3.0, 1e-6);
  EXPECT_NEAR(e.phi, 0.610370, 1e-6);
  EXPECT_NEAR(1.0 - e.phi, 0.39, 0.005);
}

TEST(PhiMpaAnalytic, SinglePoolIsOne) { EXPECT_DOUBLE_EQ(phi_mpa_analytic(1, 400, 1000).phi, 1.0); }

TEST(PhiMpaAnalytic, MatchesMonteCarloOracle) {
  double sum = 0.0, var = 0.0;
  for (int terms = 2; terms <= 4; ++terms) {
    const double F = mc_sum_cdf(terms, 400, 1000, 400000, 10 + terms);
    sum += F;
    var += F * (1 - F) / 400000;
  }
  EXPECT_NEAR(phi_mpa_analytic(4, 400, 1000).phi, 1.0 - sum / 4.0, 4 * std::sqrt(var) / 4.0);
}

TEST(Analytic, ParameterErrors) {
  EXPECT_THROW(phi_mp_analytic(0, 400, 1000), ParameterError);
  EXPECT_THROW(phi_mp_analytic(2, 0, 1000), ParameterError);
  EXPECT_THROW(phi_mpa_analytic(2, 400, -1), ParameterError);
}

TEST(Analytic, MpaNeverWorseThanMpOrIndividual) {
  for (std::size_t K = 1; K <= 10; ++K) {
    for (double theta : {100.0, 300.0, 400.0, 700.0, 2000.0}) {
      const double mpa = phi_mpa_analytic(K, theta, 1000).phi;
      EXPECT_LE(mpa, std::min(phi_mp_analytic(K, theta, 1000).phi, 1.0) + 1e-12);
    }
  }
}

TEST(MmpaBounds, Examples) {
  std::vector<double> ones(3, 1.0);
  const auto b = phi_mmpa_bounds(4, 0.0, ones);
  EXPECT_DOUBLE_EQ(b.lower, 0.25);
  EXPECT_DOUBLE_EQ(b.upper, 0.25);

  const double p = std::exp(-2.5);
  const auto c = phi_mmpa_bounds(3, p, exponential_tail_cdfs(3, 400, 1000));
  EXPECT_NEAR(c.lower, (1.0 + 3.0 * 0.082085 - std::pow(0.082085, 3)) / 3.0, 1e-6);
  EXPECT_NEAR(c.lower, 0.415234, 1e-6);
  EXPECT_NEAR(c.upper, phi_mpa_analytic(3, 400, 1000).phi, 1e-12);

  const auto d = phi_mmpa_bounds(5, p, exponential_tail_cdfs(5, 400, 1000));
  EXPECT_NEAR(d.lower, (1 + 5 * p - std::pow(p, 5)) / 5, 1e-12);
}

TEST(MmpaBounds, LowerNeverExceedsUpper) {
  for (std::size_t K = 1; K <= 10; ++K) {
    for (double theta : {50.0, 200.0, 400.0, 700.0, 1500.0, 5000.0}) {
      const auto b = phi_mmpa_bounds(K, std::exp(-1000 / theta), exponential_tail_cdfs(K, theta, 1000));
      EXPECT_LE(b.lower, b.upper + 1e-12) << "K=" << K << " theta=" << theta;
    }
  }
}

TEST(MmpaBounds, Errors) {
  std::vector<double> two(2, 0.5);
  EXPECT_THROW(phi_mmpa_bounds(4, 0.1, two), ParameterError);
  EXPECT_THROW(phi_mmpa_bounds(3, 1.5, two), ParameterError);
}

TEST(ValueGrid, BinsToNearestNode) {
  const ValueGrid g(1000, 1024);
  EXPECT_EQ(g.bin(0.0), 0u);
  EXPECT_EQ(g.bin(1000.0), 1023u);
  EXPECT_EQ(g.bin(1000.5), 1024u);
  EXPECT_EQ(g.bin(g.node(17)), 17u);
  EXPECT_EQ(g.bin(g.node(17) + 0.4 * g.step()), 17u);
  EXPECT_EQ(g.bin(g.node(17) + 0.6 * g.step()), 18u);
  EXPECT_THROW(ValueGrid(1000, 63), ParameterError);
}

TEST(EmpiricalTailCdf, LastLevelIsEcdf) {
  Cohort c({200, 1200, 800});
  EXPECT_NEAR(empirical_tail_cdf(c, 3, 3, 1000).at_cutoff, 2.0 / 3.0, 1e-15);
}

TEST(EmpiricalTailCdf, PairAboveCutoff) {
  Cohort c({600, 600});
  EXPECT_EQ(empirical_tail_cdf(c, 1, 2, 1000).at_cutoff, 0.0);
}

TEST(EmpiricalTailCdf, MatchesBruteForceOnGridValues) {
  RngStream r(3, 0);
  const std::size_t G = 128;
  const ValueGrid grid(1000, G);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t N = 2 + r.below(5);
    std::vector<std::size_t> bins(N);
    std::vector<double> values(N);
    for (std::size_t i = 0; i < N; ++i) {
      bins[i] = r.below(G + 40);
      values[i] = bins[i] < G ? grid.node(bins[i]) : 1000.0 + static_cast<double>(bins[i]);
    }
    const Cohort c(values);
    const std::size_t K = 1 + r.below(4);
    for (std::size_t j = 1; j <= K; ++j) {
      const double expected = brute_sum_cdf(bins, K - j + 1, G - 1);
      EXPECT_NEAR(empirical_tail_cdf(c, j, K, 1000, G).at_cutoff, expected, 1e-12);
    }
  }
}

TEST(EmpiricalTailCdf, ConvergesToErlang) {
  const auto c = exp_cohort(400, 20000, 4);
  EXPECT_NEAR(empirical_tail_cdf(c, 1, 3, 1000).at_cutoff, gamma_cdf(1000, 3, 400), 0.01);
  EXPECT_NEAR(empirical_tail_cdf(c, 2, 3, 1000).at_cutoff, gamma_cdf(1000, 2, 400), 0.01);
}

TEST(EmpiricalTailCdf, MonotoneInLevelAndValue) {
  RngStream r(5, 0);
  for (int trial = 0; trial < 30; ++trial) {
    const auto c = exp_cohort(100 + 900 * r.uniform(), 10 + r.below(300), 100 + trial);
    const std::size_t K = 1 + r.below(8);
    const auto F = empirical_tail_cdfs(c, K, 1000, 256);
    for (std::size_t j = 1; j < K; ++j) ASSERT_LE(F[j - 1], F[j] + 1e-12);
    const auto curve = empirical_tail_cdf(c, 1, K, 1000, 256).curve;
    for (std::size_t g = 1; g < curve.size(); ++g) ASSERT_LE(curve[g - 1], curve[g] + 1e-12);
  }
}

TEST(EmpiricalTailCdf, Errors) {
  EXPECT_THROW(empirical_tail_cdf(Cohort{}, 1, 2, 1000), DataError);
  Cohort c({1, 2});
  EXPECT_THROW(empirical_tail_cdf(c, 3, 2, 1000), ParameterError);
  EXPECT_THROW(empirical_tail_cdf(c, 1, 2, 1000, 32), ParameterError);
}

TEST(PhiEmpirical, TrivialCohorts) {
  const Cohort zeros(std::vector<double>(10, 0.0));
  EXPECT_DOUBLE_EQ(phi_mp_empirical(zeros, 4, 1000).phi, 0.25);
  EXPECT_NEAR(phi_mpa_empirical(zeros, 3, 1000).phi, 1.0 / 3.0, 1e-15);
  const Cohort pair({600, 600});
  EXPECT_DOUBLE_EQ(phi_mp_empirical(pair, 2, 1000).phi, 1.5);
  EXPECT_DOUBLE_EQ(phi_mpa_empirical(pair, 2, 1000).phi, 1.0);
}

TEST(PhiEmpirical, ExponentialCohortNearAnchors) {
  const auto c = exp_cohort(400, 2000, 6);
  EXPECT_NEAR(phi_mp_empirical(c, 2, 1000).phi, 0.787297, 0.02);
  EXPECT_NEAR(phi_mpa_empirical(c, 3, 1000).phi, 0.610370, 0.02);
  EXPECT_EQ(phi_mp_empirical(c, 2, 1000).method, Method::convolution);
}

TEST(PhiEmpirical, MpaAtMostMinOfMpAndOne) {
  RngStream r(7, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto c = exp_cohort(100 + 1000 * r.uniform(), 20 + r.below(500), 200 + trial);
    for (std::size_t K = 1; K <= 8; ++K) {
      const double mpa = phi_mpa_empirical(c, K, 1000, 256).phi;
      ASSERT_LE(mpa, std::min(phi_mp_empirical(c, K, 1000, 256).phi, 1.0) + 1e-12);
      ASSERT_GE(mpa, 1.0 / static_cast<double>(K) - 1e-12);
    }
  }
}

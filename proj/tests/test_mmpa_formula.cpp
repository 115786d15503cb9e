#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "qpool/estimators/convolution.hpp"
#include "qpool/estimators/mmpa_formula.hpp"
#include "qpool/estimators/risk_score.hpp"
#include "qpool/procedures.hpp"

using namespace qpool;

namespace {

Cohort scored_cohort(double theta, std::size_t N, double lambda, std::uint64_t seed) {
  RngStream r(seed, 0), s(seed, 1);
  Cohort c(sample_exponential(theta, N, r));
  c.scores = make_risk_score(c.values, lambda, s);
  return c;
}

// Pools of K drawn with replacement from the cohort rows, all N^K ordered draws.
double mmpa_with_replacement(const Cohort& c, std::size_t K, double C) {
  const std::size_t N = c.size();
  std::vector<std::size_t> idx(K, 0);
  std::vector<double> v(K), s(K);
  double assays = 0.0;
  std::size_t pools = 0;
  const Threshold t(C);
  for (;;) {
    for (std::size_t k = 0; k < K; ++k) {
      v[k] = c.values[idx[k]];
      s[k] = (*c.scores)[idx[k]];
    }
    assays += static_cast<double>(run_mmpa(Pool{v, s}, t).assays_used);
    ++pools;
    std::size_t p = 0;
    while (p < K && ++idx[p] == N) idx[p++] = 0;
    if (p == K) break;
  }
  return assays / static_cast<double>(pools * K);
}

}  // namespace

TEST(MmpaFormula, RequiresScores) {
  Cohort c({1, 2, 3});
  EXPECT_THROW(phi_mmpa_formula(c, 2, 1000), ConfigurationError);
}

TEST(MmpaFormula, ConstantScoresAreDegenerate) {
  Cohort c({1, 2, 3}, {0.5, 0.5, 0.5});
  EXPECT_THROW(phi_mmpa_formula(c, 2, 1000), DegenerateScoreError);
}

TEST(MmpaFormula, SinglePoolIsOne) {
  const auto c = scored_cohort(400, 100, 0.5, 1);
  EXPECT_DOUBLE_EQ(phi_mmpa_formula(c, 1, 1000).phi, 1.0);
}

TEST(MmpaFormula, IndependentScoreMatchesMpa) {
  const auto c = scored_cohort(400, 2000, 0.0, 2);
  for (std::size_t K : {2u, 3u, 5u}) {
    EXPECT_NEAR(phi_mmpa_formula(c, K, 1000).phi, phi_mpa_empirical(c, K, 1000).phi, 0.01) << "K=" << K;
  }
}

TEST(MmpaFormula, OracleScoreBeatsMpa) {
  auto c = scored_cohort(400, 2000, 1.0, 3);
  const double mmpa = phi_mmpa_formula(c, 3, 1000).phi;
  const double mpa = phi_mpa_empirical(c, 3, 1000).phi;
  EXPECT_LT(mmpa, mpa - 0.02);
  EXPECT_EQ(phi_mmpa_formula(c, 3, 1000).method, Method::beta_formula);
}

TEST(MmpaFormula, MatchesWithReplacementEnumerationOnSixRows) {
  // values increase with the score, so the fitted conditional law is the row itself
  Cohort c({0, 150, 300, 700, 1300, 2500}, {1, 2, 3, 4, 5, 6});
  for (std::size_t K = 2; K <= 4; ++K) {
    EXPECT_NEAR(phi_mmpa_formula(c, K, 1000).phi, mmpa_with_replacement(c, K, 1000), 0.01) << "K=" << K;
  }
  Cohort d({0, 900, 20, 1100, 40, 450}, {1, 5, 2, 6, 3, 4});
  for (std::size_t K = 2; K <= 4; ++K) {
    EXPECT_NEAR(phi_mmpa_formula(d, K, 1000).phi, mmpa_with_replacement(d, K, 1000), 0.01) << "K=" << K;
  }
}

TEST(MmpaFormula, NeverAboveMpaOnRandomCohorts) {
  RngStream r(4, 0);
  for (int trial = 0; trial < 12; ++trial) {
    const auto c = scored_cohort(200 + 600 * r.uniform(), 100 + r.below(900), r.uniform(), 50 + trial);
    MmpaFormulaEngine engine(c, 1000, {256, 64});
    for (std::size_t K = 2; K <= 6; ++K) {
      ASSERT_LE(engine.phi(K).phi, phi_mpa_empirical(c, K, 1000, 256).phi + 1e-12) << "trial " << trial;
    }
  }
}

TEST(MmpaFormula, StrongerScoreIsMoreEfficient) {
  RngStream r(5, 0);
  const auto base = sample_exponential(400, 2000, r);
  double prev = 2.0;
  for (double lambda : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    RngStream s(6, 0);
    Cohort c(base, make_risk_score(base, lambda, s));
    const double phi = phi_mmpa_formula(c, 4, 1000, {256, 64}).phi;
    EXPECT_LE(phi, prev + 0.005) << "lambda " << lambda;
    prev = phi;
  }
}

TEST(MmpaFormula, IsotonicFitIsAValidMonotoneModel) {
  const auto c = scored_cohort(400, 300, 0.4, 7);
  MmpaFormulaEngine e(c, 1000, {128, 16});
  const std::size_t G = e.grid().size();
  for (std::size_t i = 0; i < e.size(); ++i) {
    for (std::size_t g = 1; g < G; ++g) ASSERT_LE(e.conditional_cdf(i, g - 1), e.conditional_cdf(i, g) + 1e-12);
  }
  for (std::size_t g = 0; g < G; ++g) {
    double mean = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (i > 0) {
        ASSERT_LE(e.conditional_cdf(i, g), e.conditional_cdf(i - 1, g) + 1e-12);
      }
      mean += e.conditional_cdf(i, g);
    }
    std::size_t below = 0;
    for (double v : c.values) below += e.grid().bin(v) <= g;
    ASSERT_NEAR(mean / e.size(), static_cast<double>(below) / c.size(), 1e-12);
  }
}

TEST(MmpaFormula, RankWindowAlternative) {
  const auto c = scored_cohort(400, 2000, 0.5, 8);
  MmpaFormulaOptions opt;
  opt.conditional = ConditionalEstimator::rank_window;
  const double rw = phi_mmpa_formula(c, 3, 1000, opt).phi;
  const double iso = phi_mmpa_formula(c, 3, 1000).phi;
  EXPECT_NEAR(rw, iso, 0.02);
  EXPECT_LT(rw, phi_mpa_empirical(c, 3, 1000).phi);
}

TEST(MmpaFormula, TailCdfsAreMonotoneInLevel) {
  const auto c = scored_cohort(400, 1000, 0.6, 9);
  MmpaFormulaEngine e(c, 1000, {256, 32});
  const auto F = e.tail_cdfs(6);
  for (std::size_t j = 1; j < F.size(); ++j) EXPECT_LE(F[j - 1], F[j] + 1e-9);
}

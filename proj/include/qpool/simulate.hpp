#pragma once

// Synthetic cohorts: exponential assay values with a noisy rank score, and a
// viral-load-like mixture with a point mass at zero.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "qpool/distributions.hpp"
#include "qpool/errors.hpp"
#include "qpool/estimators/cohort.hpp"
#include "qpool/estimators/monte_carlo.hpp"
#include "qpool/estimators/risk_score.hpp"

namespace qpool {

/// Exp(theta) values of cohort r with the score lambda * Rank/N + (1 - lambda) * U.
inline Cohort exponential_cohort(double theta, std::size_t N, double lambda, std::uint64_t seed,
                                 std::uint64_t r = 0) {
  RngStream value_rng = RngStream::derived(seed, stream_tag::cohort, r);
  RngStream score_rng = RngStream::derived(seed, stream_tag::score, r);
  Cohort c(sample_exponential(theta, N, value_rng));
  c.scores = make_risk_score(c.values, lambda, score_rng);
  return c;
}

/// Efficiency averaged over R fresh exponential cohorts of size N; replicate r
/// pools cohort r once with the stream layout of phi_monte_carlo.
inline std::vector<EfficiencyEstimate> simulated_efficiency(double theta, std::size_t N, double lambda,
                                                            std::size_t K, double C,
                                                            const std::vector<Procedure>& procs,
                                                            const MonteCarloOptions& opt) {
  if (opt.replicates < 1) throw ParameterError("replicates must be >= 1");
  if (N < K) throw ParameterError("cohort size N must be >= K");
  auto tallies = parallel_map<ReplicateTally>(opt.replicates, opt.threads, [&](std::size_t r) {
    const Cohort cohort = exponential_cohort(theta, N, lambda, opt.seed, r);
    return detail::run_replicate(cohort, K, C, procs, opt, r);
  });
  std::vector<EfficiencyEstimate> out;
  for (std::size_t t = 0; t < procs.size(); ++t) {
    std::vector<double> x;
    std::uint64_t assays = 0, individuals = 0;
    for (const auto& tl : tallies) {
      x.push_back(static_cast<double>(tl.assays[t]) / static_cast<double>(tl.individuals));
      assays += tl.assays[t];
      individuals += tl.individuals;
    }
    const double phi = static_cast<double>(assays) / static_cast<double>(individuals);
    out.push_back({phi, Method::monte_carlo, K, std::nullopt, detail::standard_error_of(x, phi)});
  }
  return out;
}

struct ViralLoadModel {
  double failure_rate = 0.21;
  double zero_fraction = 0.55;  // among non-failures
  double suppressed_median = 80.0;
  double suppressed_log_sd = 1.0;
  double failure_median = 15000.0;
  double failure_log_sd = 1.6;
  double cutoff = 1000.0;
};

/// Non-failures: zero or lognormal capped below the cutoff; failures: lognormal
/// kept above the cutoff.
inline std::vector<double> viral_load_values(std::size_t N, RngStream& rng, const ViralLoadModel& m = {}) {
  if (N == 0) throw ParameterError("cohort size must be >= 1");
  std::vector<double> v(N);
  for (auto& x : v) {
    if (rng.uniform() < m.failure_rate) {
      x = std::max(m.cutoff + 1.0, m.failure_median * std::exp(m.failure_log_sd * rng.normal()));
    } else if (rng.uniform() < m.zero_fraction) {
      x = 0.0;
    } else {
      x = std::min(m.cutoff - 1.0, m.suppressed_median * std::exp(m.suppressed_log_sd * rng.normal()));
    }
  }
  return v;
}

/// Viral-load cohort whose score reaches the target Spearman correlation.
inline Cohort viral_load_cohort(std::size_t N, double target_spearman, std::uint64_t seed,
                                const ViralLoadModel& m = {}) {
  RngStream value_rng = RngStream::derived(seed, stream_tag::cohort, 0);
  Cohort c(viral_load_values(N, value_rng, m));
  const std::uint64_t score_seed = detail::mix64(seed ^ stream_tag::score);
  const double lambda = calibrate_lambda(c.values, target_spearman, score_seed);
  RngStream score_rng(score_seed, 0);
  c.scores = make_risk_score(c.values, lambda, score_rng);
  return c;
}

}  // namespace qpool

#pragma once

// Efficiency by repeated random pooling of a cohort.
//
// Replicate r shuffles the cohort with RngStream(seed, r) and cuts it into
// floor(N/K) consecutive pools. Error draws and procedure-specific orderings
// come from purpose-keyed substreams of the same replicate, so every procedure
// sees the same pools and the same error realizations.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "qpool/distributions.hpp"
#include "qpool/errors.hpp"
#include "qpool/estimators/analytic.hpp"
#include "qpool/estimators/cohort.hpp"
#include "qpool/parallel.hpp"
#include "qpool/procedures.hpp"

namespace qpool {

enum class Procedure { individual, mp, mpa, mmpa };

inline std::string to_string(Procedure p) {
  switch (p) {
    case Procedure::individual: return "ind";
    case Procedure::mp: return "mp";
    case Procedure::mpa: return "mpa";
    case Procedure::mmpa: return "mmpa";
  }
  return "unknown";
}

inline Procedure procedure_from_string(const std::string& s) {
  if (s == "ind" || s == "individual") return Procedure::individual;
  if (s == "mp") return Procedure::mp;
  if (s == "mpa") return Procedure::mpa;
  if (s == "mmpa") return Procedure::mmpa;
  throw ParameterError("unknown procedure '" + s + "' (expected ind, mp, mpa or mmpa)");
}

/// Individuals left over when K does not divide N.
enum class RemainderPolicy { exclude, individual_test };

namespace stream_tag {
inline constexpr std::uint64_t error = 0x6572726f72ULL;
inline constexpr std::uint64_t mpa_order = 0x6d70616f7264ULL;
inline constexpr std::uint64_t mmpa_ties = 0x6d6d70617469ULL;
inline constexpr std::uint64_t cohort = 0x636f686f7274ULL;
inline constexpr std::uint64_t score = 0x73636f7265ULL;
inline constexpr std::uint64_t bootstrap = 0x626f6f74ULL;
}  // namespace stream_tag

struct MonteCarloOptions {
  std::size_t replicates = 200;  // 0 = choose from target_se
  std::uint64_t seed = 1;
  ErrorModel error{};
  RemainderPolicy remainder = RemainderPolicy::exclude;
  LastSample last_sample = LastSample::deduce;
  bool enumerate = false;  // every ordering of the cohort instead of random shuffles
  std::size_t threads = 1;
  double target_se = 0.005;
  std::size_t min_replicates = 20;
  std::size_t max_replicates = 5000;
};

/// Assays and individuals covered by one replicate, per procedure.
struct ReplicateTally {
  std::vector<std::uint64_t> assays;
  std::uint64_t individuals = 0;
};

namespace detail {

inline void check_mc_inputs(const Cohort& cohort, std::size_t K, const std::vector<Procedure>& procs) {
  cohort.validate();
  if (K < 1) throw ParameterError("pool size K must be >= 1");
  if (cohort.size() < K) {
    throw DataError("cohort of " + std::to_string(cohort.size()) + " is smaller than the pool size " +
                    std::to_string(K));
  }
  if (procs.empty()) throw ParameterError("no procedures requested");
  for (Procedure p : procs) {
    if (p == Procedure::mmpa && !cohort.has_scores()) {
      throw ConfigurationError("mMPA requires risk scores for every individual");
    }
  }
}

// Runs every procedure on the pools given by `perm`; errors, orders and
// tie-breaks come from the supplied streams (null error stream = exact tests).
inline ReplicateTally pool_and_count(const Cohort& cohort, std::span<const std::size_t> perm, std::size_t K,
                                     double C, const std::vector<Procedure>& procs, const MonteCarloOptions& opt,
                                     RngStream* error_rng, RngStream* order_rng, RngStream* ties_rng) {
  const Threshold threshold(C);
  const std::size_t n_pools = perm.size() / K;
  ReplicateTally tally;
  tally.assays.assign(procs.size(), 0);
  std::vector<double> v(K), s(cohort.has_scores() ? K : 0), eps(error_rng ? K : 0);
  std::vector<std::size_t> order(K);
  for (std::size_t p = 0; p < n_pools; ++p) {
    for (std::size_t k = 0; k < K; ++k) {
      const std::size_t idx = perm[p * K + k];
      v[k] = cohort.values[idx];
      if (!s.empty()) s[k] = (*cohort.scores)[idx];
    }
    Pool pool{v, s};
    if (error_rng) {
      pool.pool_error = sample_error(opt.error, *error_rng);
      for (auto& e : eps) e = sample_error(opt.error, *error_rng);
      pool.individual_errors = eps;
    }
    for (std::size_t t = 0; t < procs.size(); ++t) {
      ProcedureResult res;
      switch (procs[t]) {
        case Procedure::individual: res = run_individual(pool, threshold); break;
        case Procedure::mp: res = run_mp(pool, threshold); break;
        case Procedure::mpa:
          std::iota(order.begin(), order.end(), std::size_t{0});
          if (order_rng) order_rng->shuffle(order);
          res = run_mpa(pool, order, threshold, opt.last_sample);
          break;
        case Procedure::mmpa:
          res = ties_rng ? run_mmpa(pool, threshold, *ties_rng, opt.last_sample)
                         : run_mmpa(pool, threshold, opt.last_sample);
          break;
      }
      tally.assays[t] += res.assays_used;
    }
  }
  tally.individuals = n_pools * K;
  if (opt.remainder == RemainderPolicy::individual_test) {
    const std::size_t rest = perm.size() - n_pools * K;
    for (auto& a : tally.assays) a += rest;
    tally.individuals += rest;
  }
  return tally;
}

inline ReplicateTally run_replicate(const Cohort& cohort, std::size_t K, double C,
                                    const std::vector<Procedure>& procs, const MonteCarloOptions& opt,
                                    std::uint64_t r) {
  RngStream shuffle_rng(opt.seed, r);
  std::vector<std::size_t> perm(cohort.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  shuffle_rng.shuffle(perm);
  RngStream error_rng = RngStream::derived(opt.seed, stream_tag::error, r);
  RngStream order_rng = RngStream::derived(opt.seed, stream_tag::mpa_order, r);
  RngStream ties_rng = RngStream::derived(opt.seed, stream_tag::mmpa_ties, r);
  return pool_and_count(cohort, perm, K, C, procs, opt, opt.error.is_exact() ? nullptr : &error_rng, &order_rng,
                        &ties_rng);
}

inline double mean_of(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

inline double standard_error_of(const std::vector<double>& x, double m) {
  if (x.size() < 2) return 0.0;
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1) / static_cast<double>(x.size()));
}

inline double standard_error_of(const std::vector<double>& x) { return x.empty() ? 0.0 : standard_error_of(x, mean_of(x)); }

}  // namespace detail

/// Exact assay total over every ordering of the cohort (N <= 10, exact tests).
/// Pools are consecutive blocks of each permutation; MPA tests in pool order and
/// mMPA breaks score ties by pool position, so averaging over permutations
/// averages over partitions, within-pool orders and tie-breaks.
struct EnumerationTotals {
  std::vector<std::uint64_t> assays;  // per procedure, summed over permutations
  std::uint64_t individuals = 0;      // summed over permutations
};

inline EnumerationTotals enumerate_assays(const Cohort& cohort, std::size_t K, double C,
                                          const std::vector<Procedure>& procs, const MonteCarloOptions& opt = {}) {
  detail::check_mc_inputs(cohort, K, procs);
  if (cohort.size() > 10) throw ParameterError("enumeration mode is limited to N <= 10");
  if (!opt.error.is_exact()) throw ParameterError("enumeration mode requires exact tests");
  std::vector<std::size_t> perm(cohort.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  EnumerationTotals totals;
  totals.assays.assign(procs.size(), 0);
  do {
    const auto t = detail::pool_and_count(cohort, perm, K, C, procs, opt, nullptr, nullptr, nullptr);
    for (std::size_t i = 0; i < procs.size(); ++i) totals.assays[i] += t.assays[i];
    totals.individuals += t.individuals;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return totals;
}

/// One estimate per procedure, all from the same pools and error draws.
inline std::vector<EfficiencyEstimate> phi_monte_carlo_joint(const Cohort& cohort, std::size_t K, double C,
                                                             const std::vector<Procedure>& procs,
                                                             const MonteCarloOptions& opt = {}) {
  detail::check_mc_inputs(cohort, K, procs);
  opt.error.validate();
  std::vector<EfficiencyEstimate> out(procs.size());
  if (opt.enumerate) {
    const auto totals = enumerate_assays(cohort, K, C, procs, opt);
    for (std::size_t i = 0; i < procs.size(); ++i) {
      out[i] = {static_cast<double>(totals.assays[i]) / static_cast<double>(totals.individuals),
                Method::monte_carlo, K, std::nullopt, 0.0};
    }
    return out;
  }

  auto run_range = [&](std::size_t from, std::size_t to) {
    return parallel_map<ReplicateTally>(to - from, opt.threads, [&](std::size_t i) {
      return detail::run_replicate(cohort, K, C, procs, opt, from + i);
    });
  };

  auto phi_of = [&](const ReplicateTally& tl, std::size_t t) {
    return static_cast<double>(tl.assays[t]) / static_cast<double>(tl.individuals);
  };

  // replicate count per procedure; a procedure's estimate never depends on
  // which other procedures share the run
  std::vector<std::size_t> reps(procs.size(), opt.replicates);
  std::vector<ReplicateTally> tallies;
  if (opt.replicates == 0) {
    // pilot run, then extend to reach the target standard error
    tallies = run_range(0, opt.min_replicates);
    for (std::size_t t = 0; t < procs.size(); ++t) {
      std::vector<double> x;
      for (const auto& tl : tallies) x.push_back(phi_of(tl, t));
      const double sd = detail::standard_error_of(x) * std::sqrt(static_cast<double>(x.size()));
      const auto need = static_cast<std::size_t>(std::ceil(std::pow(sd / opt.target_se, 2.0)));
      reps[t] = std::clamp(need, opt.min_replicates, opt.max_replicates);
    }
    const std::size_t R = *std::max_element(reps.begin(), reps.end());
    if (R > tallies.size()) {
      auto more = run_range(tallies.size(), R);
      tallies.insert(tallies.end(), more.begin(), more.end());
    }
  } else {
    tallies = run_range(0, opt.replicates);
  }

  for (std::size_t t = 0; t < procs.size(); ++t) {
    std::vector<double> x(reps[t]);
    std::uint64_t assays = 0, individuals = 0;
    for (std::size_t r = 0; r < reps[t]; ++r) {
      x[r] = static_cast<double>(tallies[r].assays[t]) / static_cast<double>(tallies[r].individuals);
      assays += tallies[r].assays[t];
      individuals += tallies[r].individuals;
    }
    // every replicate covers the same individuals, so the pooled ratio is the mean
    const double phi = static_cast<double>(assays) / static_cast<double>(individuals);
    out[t] = {phi, Method::monte_carlo, K, std::nullopt, detail::standard_error_of(x, phi)};
  }
  return out;
}

inline EfficiencyEstimate phi_monte_carlo(const Cohort& cohort, std::size_t K, double C, Procedure procedure,
                                          const MonteCarloOptions& opt = {}) {
  return phi_monte_carlo_joint(cohort, K, C, {procedure}, opt).front();
}

}  // namespace qpool

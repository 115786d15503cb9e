#pragma once

// Individual testing, MP, MPA and mMPA executed on a single pool.
//
// A pool is tested once; MP then tests every member, while MPA/mMPA test
// members one at a time and subtract each observed value from the running
// remainder T = K * V_pool, stopping as soon as the remainder is <= C.
// Sub-pools are never re-measured.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "qpool/distributions.hpp"
#include "qpool/errors.hpp"

namespace qpool {

/// Failure cutoff C in assay units. A pool of K is positive above C / K.
class Threshold {
 public:
  explicit Threshold(double cutoff) : cutoff_(cutoff) {
    if (!(cutoff > 0.0) || !std::isfinite(cutoff)) {
      throw ParameterError("cutoff C must be positive and finite, got " + std::to_string(cutoff));
    }
  }

  double value() const noexcept { return cutoff_; }
  double pool_cutoff(std::size_t K) const noexcept { return cutoff_ / static_cast<double>(K); }

 private:
  double cutoff_;
};

/// Non-owning view of one pool and its measurement-error realization.
///
/// `risk_scores` is empty when no scores are available; `individual_errors`
/// empty means every individual test is exact.
struct Pool {
  std::span<const double> true_values;
  std::span<const double> risk_scores{};
  double pool_error = 1.0;
  std::span<const double> individual_errors{};

  std::size_t size() const noexcept { return true_values.size(); }
  bool has_scores() const noexcept { return !risk_scores.empty(); }

  double error(std::size_t j) const noexcept { return individual_errors.empty() ? 1.0 : individual_errors[j]; }
  double observed(std::size_t j) const noexcept { return true_values[j] * error(j); }

  /// Observed pool total K * V~_pool = eps_pool * sum(V).
  double observed_total() const noexcept {
    return pool_error * std::accumulate(true_values.begin(), true_values.end(), 0.0);
  }

  void validate() const {
    if (true_values.empty()) throw ParameterError("pool must contain at least one sample");
    for (double v : true_values) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw ParameterError("pool values must be finite and >= 0");
    }
    if (!(pool_error > 0.0) || !std::isfinite(pool_error)) throw ParameterError("pool error must be positive");
    if (!individual_errors.empty()) {
      if (individual_errors.size() != true_values.size()) {
        throw ParameterError("individual_errors must match the pool size");
      }
      for (double e : individual_errors) {
        if (!(e > 0.0) || !std::isfinite(e)) throw ParameterError("individual errors must be positive");
      }
    }
    if (!risk_scores.empty() && risk_scores.size() != true_values.size()) {
      throw ParameterError("risk_scores must match the pool size");
    }
  }
};

/// What MPA/mMPA do when K-1 members were tested and the remainder still exceeds C.
///
/// `deduce` classifies the last member from the remainder without an assay
/// (the accounting behind the efficiency formulas); `test` spends one more
/// assay on it, which keeps the remainder's accumulated error out of its call.
enum class LastSample { deduce, test };

struct ProcedureResult {
  std::size_t assays_used = 0;
  std::vector<bool> classifications;  // true = classified failure
  std::size_t stop_index = 0;         // number of members individually tested
  double observed_pool_value = 0.0;   // V~_pool
  bool last_deduced = false;          // last member classified from the remainder
};

struct Observation {
  double observed;
  bool failure;
};

inline Observation classify_individual(double v, double eps, const Threshold& C) noexcept {
  const double observed = v * eps;
  return {observed, observed > C.value()};
}

/// Observed pool value V~_pool = eps_pool * mean(V).
inline double measure_pool(const Pool& pool) {
  pool.validate();
  return pool.observed_total() / static_cast<double>(pool.size());
}

/// Every member tested once, no pooling.
inline ProcedureResult run_individual(const Pool& pool, const Threshold& C) {
  pool.validate();
  const std::size_t K = pool.size();
  ProcedureResult res;
  res.assays_used = K;
  res.stop_index = K;
  res.observed_pool_value = pool.observed_total() / static_cast<double>(K);
  res.classifications.resize(K);
  for (std::size_t j = 0; j < K; ++j) res.classifications[j] = pool.observed(j) > C.value();
  return res;
}

/// Two-stage mini-pooling: K+1 assays whenever the pool is positive.
inline ProcedureResult run_mp(const Pool& pool, const Threshold& C) {
  pool.validate();
  const std::size_t K = pool.size();
  const double total = pool.observed_total();
  ProcedureResult res;
  res.observed_pool_value = total / static_cast<double>(K);
  res.classifications.assign(K, false);
  if (total <= C.value()) {
    res.assays_used = 1;
    return res;
  }
  res.assays_used = K + 1;
  res.stop_index = K;
  for (std::size_t j = 0; j < K; ++j) res.classifications[j] = pool.observed(j) > C.value();
  return res;
}

namespace detail {

inline void check_permutation(std::span<const std::size_t> order, std::size_t K) {
  if (order.size() != K) throw ParameterError("test order must list every pool member once");
  std::vector<bool> seen(K, false);
  for (std::size_t idx : order) {
    if (idx >= K || seen[idx]) throw ParameterError("test order is not a permutation of the pool");
    seen[idx] = true;
  }
}

// Sequential deconvolution shared by MPA and mMPA; `order` is already validated.
inline ProcedureResult sequential_test(const Pool& pool, std::span<const std::size_t> order, const Threshold& C,
                                       LastSample last) {
  const std::size_t K = pool.size();
  const double cutoff = C.value();
  const double total = pool.observed_total();
  ProcedureResult res;
  res.observed_pool_value = total / static_cast<double>(K);
  res.classifications.assign(K, false);
  res.assays_used = 1;
  if (total <= cutoff) return res;

  double remainder = total;
  for (std::size_t pos = 0; pos < K; ++pos) {
    const std::size_t idx = order[pos];
    if (pos + 1 == K && last == LastSample::deduce) {
      res.classifications[idx] = remainder > cutoff;
      res.last_deduced = true;
      break;
    }
    const double observed = pool.observed(idx);
    res.classifications[idx] = observed > cutoff;
    ++res.stop_index;
    remainder -= observed;
    if (remainder <= cutoff) break;
  }
  res.assays_used = 1 + res.stop_index;
  return res;
}

}  // namespace detail

/// Mini-pooling with the deconvolution stopping rule, members tested in `order`.
inline ProcedureResult run_mpa(const Pool& pool, std::span<const std::size_t> order, const Threshold& C,
                               LastSample last = LastSample::deduce) {
  pool.validate();
  detail::check_permutation(order, pool.size());
  return detail::sequential_test(pool, order, C, last);
}

/// Members sorted by decreasing score. Tied scores keep index order when
/// `ties` is null and are shuffled with it otherwise.
inline std::vector<std::size_t> risk_order(std::span<const double> scores, RngStream* ties = nullptr) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  if (ties != nullptr) {
    for (std::size_t start = 0; start < order.size();) {
      std::size_t end = start + 1;
      while (end < order.size() && scores[order[end]] == scores[order[start]]) ++end;
      for (std::size_t i = end - start; i > 1; --i) {
        const auto j = static_cast<std::size_t>(ties->below(i));
        std::swap(order[start + i - 1], order[start + j]);
      }
      start = end;
    }
  }
  return order;
}

namespace detail {

inline ProcedureResult run_mmpa_impl(const Pool& pool, const Threshold& C, RngStream* ties, LastSample last) {
  pool.validate();
  if (!pool.has_scores()) throw ConfigurationError("mMPA requires risk scores for every pool member");
  const auto order = risk_order(pool.risk_scores, ties);
  return sequential_test(pool, order, C, last);
}

}  // namespace detail

/// Marker-assisted MPA; ties in the scores keep their index order.
inline ProcedureResult run_mmpa(const Pool& pool, const Threshold& C, LastSample last = LastSample::deduce) {
  return detail::run_mmpa_impl(pool, C, nullptr, last);
}

/// Marker-assisted MPA with ties broken by a seeded shuffle.
inline ProcedureResult run_mmpa(const Pool& pool, const Threshold& C, RngStream& ties,
                                LastSample last = LastSample::deduce) {
  return detail::run_mmpa_impl(pool, C, &ties, last);
}

struct FailureCountBounds {
  std::size_t lower = 0;
  std::size_t upper = 0;
};

/// Sharp bounds on the number of failures in a pool given its observed value:
/// [1(v_pool > C), floor(K * v_pool / C)]. The upper end is a supremum, attained
/// only when K * v_pool / C is not an integer.
inline FailureCountBounds failure_count_bounds(double v_pool, std::size_t K, const Threshold& C) {
  if (K < 1) throw ParameterError("pool size must be >= 1");
  if (!(v_pool >= 0.0) || !std::isfinite(v_pool)) throw ParameterError("pool value must be finite and >= 0");
  FailureCountBounds b;
  b.lower = v_pool > C.value() ? 1 : 0;
  const double ratio = static_cast<double>(K) * v_pool / C.value();
  b.upper = std::min(K, static_cast<std::size_t>(std::floor(ratio + 1e-9)));
  return b;
}

}  // namespace qpool

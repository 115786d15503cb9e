#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "qpool/distributions.hpp"
#include "qpool/errors.hpp"
#include "qpool/estimators/cohort.hpp"

namespace qpool {

/// 1-based ranks; tied values share the average of their positions.
inline std::vector<double> average_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t k = i + 1;
    while (k < n && x[idx[k]] == x[idx[i]]) ++k;
    const double r = 0.5 * static_cast<double>(i + 1 + k);  // mean of i+1..k
    for (std::size_t m = i; m < k; ++m) ranks[idx[m]] = r;
    i = k;
  }
  return ranks;
}

/// Pearson correlation of average ranks; 0 when either input is constant.
inline double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ParameterError("spearman needs equal-length inputs");
  if (x.size() < 2) throw ParameterError("spearman needs at least 2 observations");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double mean = 0.5 * static_cast<double>(x.size() + 1);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = rx[i] - mean;
    const double dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// S = lambda * Rank(Y)/N + (1 - lambda) * U with U ~ Uniform(0, 1).
inline std::vector<double> make_risk_score(std::span<const double> values, double lambda, RngStream& rng) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ParameterError("lambda must lie in [0, 1]");
  if (values.empty()) throw DataError("cannot score an empty cohort");
  const auto ranks = average_ranks(values);
  const double n = static_cast<double>(values.size());
  std::vector<double> s(values.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double u = rng.uniform();
    s[i] = lambda * ranks[i] / n + (1.0 - lambda) * u;
  }
  return s;
}

inline std::vector<double> make_risk_score(const Cohort& cohort, double lambda, std::uint64_t seed) {
  RngStream rng(seed, 0);
  return make_risk_score(cohort.values, lambda, rng);
}

/// Lambda whose score reaches the target Spearman correlation on `values`,
/// holding the uniform noise fixed (bisection; Spearman is nondecreasing in lambda
/// for fixed noise up to rank ties).
inline double calibrate_lambda(std::span<const double> values, double target, std::uint64_t seed) {
  if (!(target >= 0.0 && target <= 1.0)) throw ParameterError("target correlation must lie in [0, 1]");
  auto corr = [&](double lambda) {
    RngStream rng(seed, 0);
    const auto s = make_risk_score(values, lambda, rng);
    return spearman(values, s);
  };
  double lo = 0.0, hi = 1.0;
  if (corr(hi) <= target) return hi;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (corr(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace qpool

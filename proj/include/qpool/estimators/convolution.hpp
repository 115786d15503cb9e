#pragma once

// Empirical tail CDFs F_{T_j}(C) of partial pool sums, evaluated by
// discrete convolution on a uniform grid over [0, C].
//
// Values are binned to the nearest grid node; values above C carry no mass
// on the grid. With p the binned PMF, the m-fold truncated convolution
// F^{(m)}[g] = sum_b p[b] F^{(m-1)}[g - b] reproduces the recursion
// F_j(c) = (1/N) sum_i F_{j+1}(c - Y_i) 1(Y_i <= c) exactly on binned data.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "qpool/errors.hpp"
#include "qpool/estimators/analytic.hpp"
#include "qpool/estimators/cohort.hpp"

namespace qpool {

inline constexpr std::size_t kDefaultGridSize = 1024;

/// G nodes 0, h, ..., C with h = C / (G - 1).
class ValueGrid {
 public:
  ValueGrid(double cutoff, std::size_t grid_size) : cutoff_(cutoff), size_(grid_size) {
    if (!(cutoff > 0.0) || !std::isfinite(cutoff)) throw ParameterError("cutoff C must be positive");
    if (grid_size < 64) throw ParameterError("grid_size must be >= 64, got " + std::to_string(grid_size));
    step_ = cutoff / static_cast<double>(grid_size - 1);
  }

  double cutoff() const noexcept { return cutoff_; }
  std::size_t size() const noexcept { return size_; }
  double step() const noexcept { return step_; }
  double node(std::size_t g) const noexcept { return static_cast<double>(g) * step_; }

  /// Nearest node, ties rounded down; size() for values above C.
  std::size_t bin(double x) const noexcept {
    if (x > cutoff_) return size_;
    const double b = std::ceil(x / step_ - 0.5);
    return static_cast<std::size_t>(std::clamp(b, 0.0, static_cast<double>(size_ - 1)));
  }

 private:
  double cutoff_;
  std::size_t size_;
  double step_ = 0.0;
};

/// Binned PMF of values on the grid and its CDF (from integer counts, so a
/// cohort inside [0, C] reaches exactly 1); mass above C is dropped.
struct BinnedDistribution {
  std::vector<double> pmf;
  std::vector<double> cdf;
};

inline BinnedDistribution bin_values(const std::vector<double>& values, const ValueGrid& grid) {
  if (values.empty()) throw DataError("cannot bin an empty cohort");
  std::vector<std::size_t> counts(grid.size(), 0);
  for (double v : values) {
    const std::size_t b = grid.bin(v);
    if (b < grid.size()) ++counts[b];
  }
  const double n = static_cast<double>(values.size());
  BinnedDistribution d;
  d.pmf.resize(grid.size());
  d.cdf.resize(grid.size());
  std::size_t acc = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    acc += counts[g];
    d.pmf[g] = static_cast<double>(counts[g]) / n;
    d.cdf[g] = static_cast<double>(acc) / n;
  }
  return d;
}

/// out[g] = sum_b pmf[b] * cdf[g - b] over b <= g.
inline void truncated_convolve(const std::vector<double>& pmf, const std::vector<double>& cdf,
                               std::vector<double>& out) {
  const std::size_t G = cdf.size();
  out.assign(G, 0.0);
  const double* in = cdf.data();
  double* o = out.data();
  for (std::size_t b = 0; b < G; ++b) {
    const double w = pmf[b];
    if (w == 0.0) continue;
    const std::size_t n = G - b;
    double* ob = o + b;
    for (std::size_t g = 0; g < n; ++g) ob[g] += w * in[g];
  }
}

inline std::vector<double> cumulative(const std::vector<double>& pmf) {
  std::vector<double> cdf(pmf.size());
  double acc = 0.0;
  for (std::size_t g = 0; g < pmf.size(); ++g) {
    acc += pmf[g];
    cdf[g] = std::min(acc, 1.0);
  }
  return cdf;
}

struct TailCdf {
  double at_cutoff = 0.0;      // F_{T_j}(C)
  std::vector<double> curve;   // F_{T_j} at every grid node
  double step = 0.0;
};

/// CDF curves of sums of m = 1..max_terms i.i.d. draws from the binned
/// distribution; element m-1 holds the m-term curve.
inline std::vector<std::vector<double>> sum_cdf_curves(const std::vector<double>& pmf, std::vector<double> cdf,
                                                       std::size_t max_terms) {
  std::vector<std::vector<double>> curves;
  curves.reserve(max_terms);
  curves.push_back(std::move(cdf));
  for (std::size_t m = 2; m <= max_terms; ++m) {
    std::vector<double> next;
    truncated_convolve(pmf, curves.back(), next);
    curves.push_back(std::move(next));
  }
  return curves;
}

/// F_{T_j} for a pool of K: the distribution of the sum of K - j + 1 values.
inline TailCdf empirical_tail_cdf(const Cohort& cohort, std::size_t j, std::size_t K, double C,
                                  std::size_t grid_size = kDefaultGridSize) {
  if (cohort.values.empty()) throw DataError("cohort is empty");
  cohort.validate();
  if (K < 1 || j < 1 || j > K) throw ParameterError("empirical_tail_cdf needs 1 <= j <= K");
  const ValueGrid grid(C, grid_size);
  auto d = bin_values(cohort.values, grid);
  auto curves = sum_cdf_curves(d.pmf, std::move(d.cdf), K - j + 1);
  TailCdf out;
  out.curve = std::move(curves.back());
  out.at_cutoff = out.curve.back();
  out.step = grid.step();
  return out;
}

/// F_{T_j}(C) for j = 1..K (element j-1).
inline std::vector<double> empirical_tail_cdfs(const Cohort& cohort, std::size_t K, double C,
                                               std::size_t grid_size = kDefaultGridSize) {
  if (cohort.values.empty()) throw DataError("cohort is empty");
  cohort.validate();
  if (K < 1) throw ParameterError("pool size K must be >= 1");
  const ValueGrid grid(C, grid_size);
  auto d = bin_values(cohort.values, grid);
  const auto curves = sum_cdf_curves(d.pmf, std::move(d.cdf), K);
  std::vector<double> out(K);
  for (std::size_t j = 1; j <= K; ++j) out[j - 1] = curves[K - j].back();
  return out;
}

/// (1 + K)/K - F_{T_1}(C).
inline EfficiencyEstimate phi_mp_empirical(const Cohort& cohort, std::size_t K, double C,
                                           std::size_t grid_size = kDefaultGridSize) {
  const auto F = empirical_tail_cdfs(cohort, K, C, grid_size);
  const double k = static_cast<double>(K);
  return {(1.0 + k) / k - F[0], Method::convolution, K, std::nullopt, 0.0};
}

/// 1 - (1/K) sum_{j<K} F_{T_j}(C).
inline EfficiencyEstimate phi_mpa_empirical(const Cohort& cohort, std::size_t K, double C,
                                            std::size_t grid_size = kDefaultGridSize) {
  const auto F = empirical_tail_cdfs(cohort, K, C, grid_size);
  double sum = 0.0;
  for (std::size_t j = 1; j < K; ++j) sum += F[j - 1];
  return {1.0 - sum / static_cast<double>(K), Method::convolution, K, std::nullopt, 0.0};
}

}  // namespace qpool

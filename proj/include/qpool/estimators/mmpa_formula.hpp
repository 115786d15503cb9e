#pragma once

// Plug-in mMPA efficiency from value-score pairs.
//
// Scores are mapped to the uniform scale by their empirical rank. The
// conditional CDF of V given the score is estimated on the value grid, then
//
//   F_{T[j]}(C) = int_0^1 f_j(u) Pr(V_u + W_1 + ... + W_{K-j} <= C) du,
//
// where f_j is the density of the j-th largest of K uniforms, V_u ~ F(.|u) and
// the W are i.i.d. from the score-truncated mixture G_u = (1/u) int_0^u F(.|t) dt.
//
// T[1] is the whole pool sum under any order, so F_{T[1]} is the plain
// convolution estimate. For j >= 2 the fitted model is positively associated,
// which makes F_{T[j]}(C) >= F_{T_j}(C); the quadrature value is kept on that
// side of the bound.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "qpool/distributions.hpp"
#include "qpool/errors.hpp"
#include "qpool/estimators/analytic.hpp"
#include "qpool/estimators/cohort.hpp"
#include "qpool/estimators/convolution.hpp"

namespace qpool {

enum class ConditionalEstimator {
  isotonic,     // antitonic-in-score distributional regression (PAVA per grid node)
  rank_window,  // empirical CDF of the 2w+1 nearest score ranks
};

struct MmpaFormulaOptions {
  std::size_t grid_size = kDefaultGridSize;
  std::size_t score_nodes = 64;
  ConditionalEstimator conditional = ConditionalEstimator::isotonic;
  std::size_t window_half_width = 0;  // 0 = ceil(sqrt(N))
};

class MmpaFormulaEngine {
 public:
  MmpaFormulaEngine(const Cohort& cohort, double C, MmpaFormulaOptions options = {})
      : options_(options), grid_(C, options.grid_size) {
    cohort.validate();
    if (!cohort.has_scores()) throw ConfigurationError("the mMPA formula requires risk scores");
    if (options_.score_nodes < 1) throw ParameterError("score_nodes must be >= 1");
    N_ = cohort.size();
    const auto& scores = *cohort.scores;

    std::vector<std::size_t> order(N_);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Tie groups in ascending score order.
    std::vector<std::size_t> group_of(N_);
    std::vector<std::size_t> group_start{0};
    for (std::size_t i = 1; i < N_; ++i) {
      if (scores[order[i]] != scores[order[i - 1]]) group_start.push_back(i);
    }
    if (group_start.size() < 2) {
      throw DegenerateScoreError("the mMPA formula needs at least 2 distinct risk scores");
    }
    group_start.push_back(N_);
    for (std::size_t gi = 0; gi + 1 < group_start.size(); ++gi) {
      for (std::size_t i = group_start[gi]; i < group_start[gi + 1]; ++i) group_of[i] = gi;
    }

    bins_.resize(N_);
    for (std::size_t i = 0; i < N_; ++i) bins_[i] = grid_.bin(cohort.values[order[i]]);

    const std::size_t G = grid_.size();
    auto marginal = bin_values(cohort.values, grid_);
    marginal_pmf_ = std::move(marginal.pmf);
    marginal_curves_.push_back(std::move(marginal.cdf));
    cond_.assign(N_ * G, 0.0);
    if (options_.conditional == ConditionalEstimator::isotonic) {
      fit_isotonic(group_start, group_of);
    } else {
      fit_rank_window();
    }
    build_mixtures();
  }

  std::size_t size() const noexcept { return N_; }
  const ValueGrid& grid() const noexcept { return grid_; }

  /// Fitted conditional CDF at sorted-score position i (ascending), grid node g.
  double conditional_cdf(std::size_t i, std::size_t g) const { return cond_[i * grid_.size() + g]; }

  /// F_{T[j]}(C) for j = 1..K-1 (element j-1).
  std::vector<double> tail_cdfs(std::size_t K) {
    if (K < 1) throw ParameterError("pool size K must be >= 1");
    std::vector<double> F(K > 0 ? K - 1 : 0, 0.0);
    if (K == 1) return F;
    ensure_powers(K - 1);

    const std::size_t G = grid_.size();
    const std::size_t M = options_.score_nodes;
    const double dN = static_cast<double>(N_);
    const double dM = static_cast<double>(M);
    std::vector<double> weight_sum(K - 1, 0.0);
    std::vector<double> pmf(G);
    std::vector<double> dots(K - 1);

    // Pieces are the intersections of the M score intervals with the N rank cells.
    std::size_t q = 0, i = 0;
    double lo = 0.0;
    while (q < M && i < N_) {
      const double q_end = static_cast<double>(q + 1) / dM;
      const double i_end = static_cast<double>(i + 1) / dN;
      const double hi = std::min(q_end, i_end);
      const double len = hi - lo;
      if (len > 0.0) {
        const double mid = 0.5 * (lo + hi);
        const double* row = &cond_[i * G];
        double prev = 0.0;
        for (std::size_t b = 0; b < G; ++b) {
          pmf[b] = row[b] - prev;
          prev = row[b];
        }
        for (std::size_t n = 1; n < K; ++n) {
          const auto& P = powers_[q][n - 1];
          double acc = 0.0;
          for (std::size_t b = 0; b < G; ++b) acc += pmf[b] * P[G - 1 - b];
          dots[n - 1] = acc;
        }
        for (std::size_t j = 1; j < K; ++j) {
          const double w = beta_order_weight(K + 1 - j, K, mid) * len;
          weight_sum[j - 1] += w;
          F[j - 1] += w * dots[K - j - 1];
        }
      }
      lo = hi;
      if (hi >= q_end) ++q;
      if (hi >= i_end) ++i;
    }
    while (marginal_curves_.size() < K) {
      std::vector<double> next;
      truncated_convolve(marginal_pmf_, marginal_curves_.back(), next);
      marginal_curves_.push_back(std::move(next));
    }
    for (std::size_t j = 1; j < K; ++j) {
      const double random_order = marginal_curves_[K - j].back();
      const double f = std::clamp(F[j - 1] / weight_sum[j - 1], 0.0, 1.0);
      F[j - 1] = j == 1 ? random_order : std::max(f, random_order);
    }
    return F;
  }

  EfficiencyEstimate phi(std::size_t K) {
    const auto F = tail_cdfs(K);
    double sum = 0.0;
    for (double f : F) sum += f;
    return {1.0 - sum / static_cast<double>(K), Method::beta_formula, K, std::nullopt, 0.0};
  }

 private:
  void fit_isotonic(const std::vector<std::size_t>& group_start, const std::vector<std::size_t>& group_of) {
    const std::size_t G = grid_.size();
    const std::size_t n_groups = group_start.size() - 1;
    std::vector<double> weight(n_groups), count_le(n_groups, 0.0);
    for (std::size_t gi = 0; gi < n_groups; ++gi) {
      weight[gi] = static_cast<double>(group_start[gi + 1] - group_start[gi]);
    }
    // members by bin, to grow the indicator counts node by node
    std::vector<std::size_t> by_bin(N_);
    std::iota(by_bin.begin(), by_bin.end(), std::size_t{0});
    std::stable_sort(by_bin.begin(), by_bin.end(), [&](std::size_t a, std::size_t b) { return bins_[a] < bins_[b]; });

    std::vector<double> block_value(n_groups), block_weight(n_groups);
    std::vector<std::size_t> block_end(n_groups);
    std::size_t next = 0;
    for (std::size_t g = 0; g < G; ++g) {
      while (next < N_ && bins_[by_bin[next]] <= g) {
        count_le[group_of[by_bin[next]]] += 1.0;
        ++next;
      }
      // PAVA for a nonincreasing fit over groups in ascending score order
      std::size_t nb = 0;
      for (std::size_t gi = 0; gi < n_groups; ++gi) {
        block_value[nb] = count_le[gi] / weight[gi];
        block_weight[nb] = weight[gi];
        block_end[nb] = gi + 1;
        ++nb;
        while (nb > 1 && block_value[nb - 2] < block_value[nb - 1]) {
          const double w = block_weight[nb - 2] + block_weight[nb - 1];
          block_value[nb - 2] =
              (block_value[nb - 2] * block_weight[nb - 2] + block_value[nb - 1] * block_weight[nb - 1]) / w;
          block_weight[nb - 2] = w;
          block_end[nb - 2] = block_end[nb - 1];
          --nb;
        }
      }
      std::size_t gi = 0;
      for (std::size_t k = 0; k < nb; ++k) {
        const double v = std::clamp(block_value[k], 0.0, 1.0);
        for (; gi < block_end[k]; ++gi) {
          for (std::size_t i = group_start[gi]; i < group_start[gi + 1]; ++i) cond_[i * G + g] = v;
        }
      }
    }
  }

  void fit_rank_window() {
    const std::size_t G = grid_.size();
    std::size_t w = options_.window_half_width;
    if (w == 0) w = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(N_))));
    const std::size_t width = std::min(N_, 2 * w + 1);
    std::vector<double> hist(G + 1, 0.0);
    std::size_t lo = 0, hi = 0;  // current window [lo, hi)
    for (std::size_t i = 0; i < N_; ++i) {
      std::size_t want_lo = i > w ? i - w : 0;
      want_lo = std::min(want_lo, N_ - width);
      const std::size_t want_hi = want_lo + width;
      while (hi < want_hi) hist[std::min(bins_[hi++], G)] += 1.0;
      while (lo < want_lo) hist[std::min(bins_[lo++], G)] -= 1.0;
      double acc = 0.0;
      for (std::size_t g = 0; g < G; ++g) {
        acc += hist[g];
        cond_[i * G + g] = acc / static_cast<double>(width);
      }
    }
  }

  // Score-truncated mixture CDF at every score-interval midpoint.
  void build_mixtures() {
    const std::size_t G = grid_.size();
    const std::size_t M = options_.score_nodes;
    mixture_pmf_.assign(M, std::vector<double>(G, 0.0));
    std::vector<double> prefix(G, 0.0);
    std::size_t filled = 0;  // rows summed into prefix
    for (std::size_t q = 0; q < M; ++q) {
      const double u = (static_cast<double>(q) + 0.5) / static_cast<double>(M);
      const double x = static_cast<double>(N_) * u;
      const auto m = std::min(static_cast<std::size_t>(std::floor(x)), N_ - 1);
      while (filled < m) {
        const double* row = &cond_[filled * G];
        for (std::size_t g = 0; g < G; ++g) prefix[g] += row[g];
        ++filled;
      }
      const double frac = x - static_cast<double>(m);
      const double* row = &cond_[m * G];
      double prev = 0.0;
      auto& pmf = mixture_pmf_[q];
      for (std::size_t g = 0; g < G; ++g) {
        const double cdf = std::clamp((prefix[g] + frac * row[g]) / x, 0.0, 1.0);
        pmf[g] = std::max(0.0, cdf - prev);
        prev = std::max(prev, cdf);
      }
    }
    powers_.assign(M, {});
  }

  void ensure_powers(std::size_t n_max) {
    for (std::size_t q = 0; q < powers_.size(); ++q) {
      auto& P = powers_[q];
      if (P.empty()) P.push_back(cumulative(mixture_pmf_[q]));
      while (P.size() < n_max) {
        std::vector<double> next;
        truncated_convolve(mixture_pmf_[q], P.back(), next);
        P.push_back(std::move(next));
      }
    }
  }

  MmpaFormulaOptions options_;
  ValueGrid grid_;
  std::size_t N_ = 0;
  std::vector<double> marginal_pmf_;
  std::vector<std::vector<double>> marginal_curves_;  // [m-1] = CDF of the m-term sum, random order
  std::vector<std::size_t> bins_;                     // by ascending score position
  std::vector<double> cond_;                          // N x G, row-major
  std::vector<std::vector<double>> mixture_pmf_;      // M x G
  std::vector<std::vector<std::vector<double>>> powers_;  // [q][n-1] = CDF of n-term sum
};

/// 1 - (1/K) sum_{j<K} F_{T[j]}(C) with Beta-weighted conditional convolutions.
inline EfficiencyEstimate phi_mmpa_formula(const Cohort& cohort, std::size_t K, double C,
                                           MmpaFormulaOptions options = {}) {
  MmpaFormulaEngine engine(cohort, C, options);
  return engine.phi(K);
}

}  // namespace qpool

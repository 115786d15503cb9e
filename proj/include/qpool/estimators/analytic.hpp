#pragma once

// Closed-form efficiencies for exponential assay values and the mMPA bounds.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qpool/distributions.hpp"
#include "qpool/errors.hpp"

namespace qpool {

enum class Method { analytic, convolution, beta_formula, monte_carlo };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::analytic: return "analytic";
    case Method::convolution: return "convolution";
    case Method::beta_formula: return "beta-formula";
    case Method::monte_carlo: return "monte-carlo";
  }
  return "unknown";
}

inline Method method_from_string(const std::string& s) {
  if (s == "analytic") return Method::analytic;
  if (s == "convolution") return Method::convolution;
  if (s == "beta-formula") return Method::beta_formula;
  if (s == "monte-carlo") return Method::monte_carlo;
  throw ParameterError("unknown estimation method '" + s + "'");
}

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  bool operator==(const Interval&) const = default;
};

/// Assays per individual.
struct EfficiencyEstimate {
  double phi = 0.0;
  Method method = Method::analytic;
  std::size_t K = 0;
  std::optional<Interval> ci;
  double standard_error = 0.0;  // Monte Carlo only
};

namespace detail {

inline void check_exponential_args(std::size_t K, double theta, double C) {
  if (K < 1) throw ParameterError("pool size K must be >= 1");
  if (!(theta > 0.0) || !std::isfinite(theta)) throw ParameterError("theta must be positive");
  if (!(C > 0.0) || !std::isfinite(C)) throw ParameterError("cutoff C must be positive");
}

}  // namespace detail

/// 1/K + Pr(T_1 > C) with T_1 ~ Erlang(K, theta).
inline EfficiencyEstimate phi_mp_analytic(std::size_t K, double theta, double C) {
  detail::check_exponential_args(K, theta, C);
  const double phi = 1.0 / static_cast<double>(K) + (1.0 - gamma_cdf(C, static_cast<int>(K), theta));
  return {phi, Method::analytic, K, std::nullopt, 0.0};
}

/// 1 - (1/K) sum_{j<K} F_{T_j}(C) with T_j ~ Erlang(K-j+1, theta).
inline EfficiencyEstimate phi_mpa_analytic(std::size_t K, double theta, double C) {
  detail::check_exponential_args(K, theta, C);
  double sum = 0.0;
  for (std::size_t j = 1; j < K; ++j) sum += gamma_cdf(C, static_cast<int>(K - j + 1), theta);
  return {1.0 - sum / static_cast<double>(K), Method::analytic, K, std::nullopt, 0.0};
}

struct EfficiencyBounds {
  double lower = 0.0;
  double upper = 0.0;
};

/// Range of mMPA efficiency for failure prevalence p and the tail CDFs
/// F_{T_j}(C), j = 1..K-1 (the upper end is the MPA efficiency).
inline EfficiencyBounds phi_mmpa_bounds(std::size_t K, double p, std::span<const double> tail_cdfs) {
  if (K < 1) throw ParameterError("pool size K must be >= 1");
  if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("prevalence p must lie in [0, 1]");
  if (tail_cdfs.size() != K - 1) {
    throw ParameterError("phi_mmpa_bounds needs K-1 tail CDF values, got " + std::to_string(tail_cdfs.size()));
  }
  const double k = static_cast<double>(K);
  EfficiencyBounds b;
  b.lower = (1.0 + k * p - std::pow(p, k)) / k;
  double sum = 0.0;
  for (double F : tail_cdfs) {
    if (!(F >= 0.0 && F <= 1.0)) throw ParameterError("tail CDF values must lie in [0, 1]");
    sum += F;
  }
  b.upper = 1.0 - sum / k;
  return b;
}

/// Erlang tail CDFs F_{T_j}(C), j = 1..K-1, for exponential values.
inline std::vector<double> exponential_tail_cdfs(std::size_t K, double theta, double C) {
  detail::check_exponential_args(K, theta, C);
  std::vector<double> out;
  for (std::size_t j = 1; j < K; ++j) out.push_back(gamma_cdf(C, static_cast<int>(K - j + 1), theta));
  return out;
}

}  // namespace qpool

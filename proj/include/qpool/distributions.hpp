#pragma once

// Seedable random streams, the measurement-error model, and the closed-form
// distribution functions used by the analytic anchors and the mMPA estimator.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "qpool/errors.hpp"

namespace qpool {

namespace detail {

/// SplitMix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

}  // namespace detail

/// Counter-based random stream keyed by (master_seed, stream_id).
///
/// Draw k of a stream is a pure function of (master_seed, stream_id, k), so a
/// replicate produces the same numbers no matter which thread runs it or in
/// which order replicates are scheduled. Satisfies UniformRandomBitGenerator.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t master_seed, std::uint64_t stream_id) noexcept
      : master_seed_(master_seed),
        stream_id_(stream_id),
        key_(detail::mix64(detail::mix64(master_seed ^ 0x6a09e667f3bcc909ULL) +
                           stream_id * 0xd1b54a32d192ed03ULL)) {}

  /// Stream for an independent purpose (identified by `tag`) of replicate `index`.
  static RngStream derived(std::uint64_t master_seed, std::uint64_t tag, std::uint64_t index) noexcept {
    return RngStream(detail::mix64(master_seed ^ detail::mix64(tag + detail::kGoldenGamma)), index);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    ++counter_;
    return detail::mix64(key_ + counter_ * detail::kGoldenGamma);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1].
  double uniform_positive() noexcept { return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = (*this)();
      if (r >= threshold) return r % n;
    }
  }

  /// Standard normal draw (Box-Muller, one value per call).
  double normal() noexcept {
    const double u1 = uniform_positive();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Fisher-Yates shuffle driven by this stream.
  template <typename T>
  void shuffle(std::vector<T>& items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }
  std::uint64_t draws() const noexcept { return counter_; }

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

enum class ErrorKind { none, lognormal };

/// Multiplicative assay error: observed = true * eps, with log(eps) ~ N(0, sigma^2).
struct ErrorModel {
  ErrorKind kind = ErrorKind::none;
  double sigma = 0.0;

  static ErrorModel exact() noexcept { return {}; }
  static ErrorModel lognormal(double sigma) noexcept { return {ErrorKind::lognormal, sigma}; }

  bool is_exact() const noexcept { return kind == ErrorKind::none || sigma == 0.0; }

  void validate() const {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
      throw ParameterError("error model sigma must be finite and >= 0, got " + std::to_string(sigma));
    }
  }
};

/// One multiplicative error realization; exactly 1 for the error-free model.
inline double sample_error(const ErrorModel& model, RngStream& rng) {
  if (model.is_exact()) return 1.0;
  return std::exp(model.sigma * rng.normal());
}

/// n i.i.d. exponential assay values with mean `theta`.
inline std::vector<double> sample_exponential(double theta, std::size_t n, RngStream& rng) {
  if (!(theta > 0.0) || !std::isfinite(theta)) {
    throw ParameterError("exponential scale theta must be positive, got " + std::to_string(theta));
  }
  if (n == 0) throw ParameterError("sample_exponential needs n >= 1");
  std::vector<double> out(n);
  for (auto& v : out) v = -theta * std::log(rng.uniform_positive());
  return out;
}

/// CDF of a gamma distribution with integer shape (Erlang) at x.
///
/// Uses the lower series below the mode region, the finite Poisson tail sum
/// above it, and a log-space tail once x/scale exceeds 700.
inline double gamma_cdf(double x, int shape, double scale) {
  if (shape < 1) throw ParameterError("gamma_cdf shape must be >= 1");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ParameterError("gamma_cdf scale must be positive");
  if (!(x >= 0.0)) throw ParameterError("gamma_cdf requires x >= 0");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;

  const double z = x / scale;
  const double k = static_cast<double>(shape);

  if (z > 700.0) {
    // log of e^{-z} sum_{m<k} z^m / m!
    double max_log = -std::numeric_limits<double>::infinity();
    std::vector<double> logs(static_cast<std::size_t>(shape));
    for (int m = 0; m < shape; ++m) {
      logs[static_cast<std::size_t>(m)] = m * std::log(z) - std::lgamma(m + 1.0);
      max_log = std::max(max_log, logs[static_cast<std::size_t>(m)]);
    }
    double acc = 0.0;
    for (double l : logs) acc += std::exp(l - max_log);
    return 1.0 - std::exp(-z + max_log + std::log(acc));
  }

  if (z < k) {
    double term = std::exp(k * std::log(z) - z - std::lgamma(k + 1.0));
    double sum = term;
    for (int m = shape + 1; m < shape + 2000; ++m) {
      term *= z / m;
      sum += term;
      if (term < sum * 1e-17) break;
    }
    return std::min(1.0, sum);
  }

  double term = std::exp(-z);
  double tail = term;
  for (int m = 1; m < shape; ++m) {
    term *= z / m;
    tail += term;
  }
  return std::max(0.0, 1.0 - tail);
}

/// Density of Beta(j, K+1-j) at u: the law of the j-th smallest of K uniforms.
inline double beta_order_weight(std::size_t j, std::size_t K, double u) {
  if (K < 1 || j < 1 || j > K) {
    throw ParameterError("beta_order_weight needs 1 <= j <= K (j=" + std::to_string(j) +
                         ", K=" + std::to_string(K) + ")");
  }
  if (!(u >= 0.0 && u <= 1.0)) throw ParameterError("beta_order_weight needs u in [0, 1]");
  // 1 / b(j, K+1-j) = K * C(K-1, j-1)
  double coef = static_cast<double>(K);
  for (std::size_t i = 1; i < j; ++i) {
    coef *= static_cast<double>(K - i) / static_cast<double>(i);
  }
  return coef * std::pow(u, static_cast<double>(j - 1)) * std::pow(1.0 - u, static_cast<double>(K - j));
}

}  // namespace qpool

#pragma once

// Percentile bootstrap over individuals (value-score pairs resampled together).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qpool/distributions.hpp"
#include "qpool/errors.hpp"
#include "qpool/estimators/analytic.hpp"
#include "qpool/estimators/cohort.hpp"
#include "qpool/estimators/monte_carlo.hpp"
#include "qpool/parallel.hpp"

namespace qpool {

using Statistic = std::function<double(const Cohort&)>;
/// Several statistics evaluated together on one cohort.
using MultiStatistic = std::function<std::vector<double>(const Cohort&)>;

struct BootstrapOptions {
  std::size_t resamples = 1000;
  std::uint64_t seed = 1;
  bool paired = true;  // every statistic sees the same resample
  double level = 0.95;
  double max_skip_fraction = 0.01;
  std::size_t threads = 1;
};

struct BootstrapResult {
  std::vector<double> estimates;                   // statistic on the original cohort
  std::vector<Interval> intervals;                 // per statistic
  std::vector<std::pair<std::size_t, std::size_t>> differences;
  std::vector<double> difference_estimates;        // estimates[a] - estimates[b]
  std::vector<Interval> difference_intervals;
  std::size_t used = 0;
  std::size_t skipped = 0;
};

/// Type-7 quantile of unsorted data.
inline double quantile(std::vector<double> x, double prob) {
  if (x.empty()) throw EstimationError("quantile of an empty sample");
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

inline Interval percentile_interval(const std::vector<double>& x, double level) {
  if (!(level > 0.0 && level < 1.0)) throw ParameterError("confidence level must lie in (0, 1)");
  const double alpha = 1.0 - level;
  return {quantile(x, alpha / 2.0), quantile(x, 1.0 - alpha / 2.0)};
}

/// Bootstrap of `n_stats` statistics with optional pairwise differences.
/// In paired mode resample b is drawn from stream (seed, b) and shared by all
/// statistics; otherwise statistic k uses its own keyed stream. A resample on
/// which a statistic throws is skipped; more than max_skip_fraction skipped
/// resamples is an estimation error.
inline BootstrapResult bootstrap(const Cohort& cohort, const MultiStatistic& statistic, std::size_t n_stats,
                                 const std::vector<std::pair<std::size_t, std::size_t>>& differences,
                                 const BootstrapOptions& opt = {}) {
  cohort.validate();
  if (opt.resamples < 100) throw ParameterError("bootstrap needs at least 100 resamples");
  for (const auto& [a, b] : differences) {
    if (a >= n_stats || b >= n_stats) throw ParameterError("difference refers to an unknown statistic");
  }

  BootstrapResult res;
  res.estimates = statistic(cohort);
  if (res.estimates.size() != n_stats) throw ParameterError("statistic returned the wrong number of values");
  res.differences = differences;

  struct Draw {
    bool ok = false;
    std::vector<double> values;
  };
  auto draws = parallel_map<Draw>(opt.resamples, opt.threads, [&](std::size_t b) {
    Draw d;
    try {
      if (opt.paired) {
        RngStream rng(opt.seed, b);
        d.values = statistic(cohort.resample(rng));
      } else {
        d.values.resize(n_stats);
        for (std::size_t k = 0; k < n_stats; ++k) {
          RngStream rng = RngStream::derived(opt.seed, stream_tag::bootstrap + k, b);
          d.values[k] = statistic(cohort.resample(rng))[k];
        }
      }
      d.ok = d.values.size() == n_stats;
    } catch (const Error&) {
      d.ok = false;
    }
    return d;
  });

  std::vector<std::vector<double>> columns(n_stats);
  std::vector<std::vector<double>> diff_columns(differences.size());
  for (const auto& d : draws) {
    if (!d.ok) {
      ++res.skipped;
      continue;
    }
    ++res.used;
    for (std::size_t k = 0; k < n_stats; ++k) columns[k].push_back(d.values[k]);
    for (std::size_t i = 0; i < differences.size(); ++i) {
      diff_columns[i].push_back(d.values[differences[i].first] - d.values[differences[i].second]);
    }
  }
  if (static_cast<double>(res.skipped) > opt.max_skip_fraction * static_cast<double>(opt.resamples)) {
    throw EstimationError("bootstrap skipped " + std::to_string(res.skipped) + " of " +
                          std::to_string(opt.resamples) + " resamples");
  }
  for (auto& c : columns) res.intervals.push_back(percentile_interval(c, opt.level));
  for (std::size_t i = 0; i < differences.size(); ++i) {
    res.difference_estimates.push_back(res.estimates[differences[i].first] - res.estimates[differences[i].second]);
    res.difference_intervals.push_back(percentile_interval(diff_columns[i], opt.level));
  }
  return res;
}

/// Percentile interval for a single statistic.
inline Interval bootstrap_ci(const Cohort& cohort, const Statistic& statistic, const BootstrapOptions& opt = {}) {
  auto multi = [&](const Cohort& c) { return std::vector<double>{statistic(c)}; };
  return bootstrap(cohort, multi, 1, {}, opt).intervals.front();
}

}  // namespace qpool

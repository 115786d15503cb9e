#pragma once

// Diagnostic accuracy of the pooling procedures under multiplicative error.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qpool/distributions.hpp"
#include "qpool/errors.hpp"
#include "qpool/estimators/monte_carlo.hpp"
#include "qpool/parallel.hpp"
#include "qpool/procedures.hpp"
#include "qpool/simulate.hpp"

namespace qpool {

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
  bool operator==(const ConfusionCounts&) const = default;
};

/// Ratios are absent when their denominator is zero.
struct AccuracyReport {
  ConfusionCounts counts;
  std::optional<double> sens, spec, ppv, npv, misclassification;
  bool operator==(const AccuracyReport&) const = default;
};

namespace detail {
inline std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace detail

inline AccuracyReport accuracy_report(const ConfusionCounts& c) {
  AccuracyReport r;
  r.counts = c;
  r.sens = detail::ratio(c.tp, c.tp + c.fn);
  r.spec = detail::ratio(c.tn, c.tn + c.fp);
  r.ppv = detail::ratio(c.tp, c.tp + c.fp);
  r.npv = detail::ratio(c.tn, c.tn + c.fn);
  r.misclassification = detail::ratio(c.fp + c.fn, c.total());
  return r;
}

inline ConfusionCounts tabulate(std::span<const double> true_values, const std::vector<bool>& classifications,
                                double C) {
  if (true_values.size() != classifications.size()) {
    throw DataError("accuracy_report: " + std::to_string(true_values.size()) + " values but " +
                    std::to_string(classifications.size()) + " classifications");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < true_values.size(); ++i) {
    const bool truth = true_values[i] > C;
    const bool call = classifications[i];
    if (truth && call) ++c.tp;
    else if (truth) ++c.fn;
    else if (call) ++c.fp;
    else ++c.tn;
  }
  return c;
}

inline AccuracyReport accuracy_report(std::span<const double> true_values, const std::vector<bool>& classifications,
                                      double C) {
  return accuracy_report(tabulate(true_values, classifications, C));
}

/// Binomial standard error of a ratio num/den; 0 when undefined.
inline double ratio_standard_error(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return 0.0;
  const double p = static_cast<double>(num) / static_cast<double>(den);
  return std::sqrt(p * (1.0 - p) / static_cast<double>(den));
}

struct AccuracyConfig {
  double theta = 400.0;
  double C = 1000.0;
  std::size_t K = 5;
  std::vector<double> sigmas{0.0, 0.05, 0.1, 0.15, 0.2, 0.25};
  std::vector<Procedure> procedures{Procedure::individual, Procedure::mp, Procedure::mpa, Procedure::mmpa};
  std::size_t N = 2000;
  std::size_t R = 100;
  std::uint64_t seed = 1;
  double lambda = 0.25;
  LastSample last_sample = LastSample::test;
  std::size_t threads = 1;
};

struct AccuracyCell {
  Procedure procedure;
  double sigma = 0.0;
  AccuracyReport report;
};

/// Counts aggregated over R cohorts of N per (sigma, procedure). For a given
/// replicate all procedures share the cohort, the pools and the error draws.
inline std::vector<AccuracyCell> accuracy_experiment(const AccuracyConfig& cfg) {
  if (cfg.sigmas.empty()) throw ParameterError("sigma grid is empty");
  if (cfg.procedures.empty()) throw ParameterError("no procedures requested");
  if (cfg.R < 1) throw ParameterError("replicates must be >= 1");
  if (cfg.N < cfg.K) throw ParameterError("N must be >= K");
  const Threshold threshold(cfg.C);
  std::vector<AccuracyCell> out;
  for (std::size_t si = 0; si < cfg.sigmas.size(); ++si) {
    const ErrorModel model = ErrorModel::lognormal(cfg.sigmas[si]);
    model.validate();
    auto per_rep = parallel_map<std::vector<ConfusionCounts>>(cfg.R, cfg.threads, [&](std::size_t r) {
      const Cohort cohort = exponential_cohort(cfg.theta, cfg.N, cfg.lambda, cfg.seed, r);
      RngStream shuffle_rng(cfg.seed, r);
      std::vector<std::size_t> perm(cfg.N);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      shuffle_rng.shuffle(perm);
      // error draws are keyed by (sigma index, replicate) so they do not depend on the procedure list
      RngStream error_rng = RngStream::derived(cfg.seed, stream_tag::error + si, r);
      RngStream order_rng = RngStream::derived(cfg.seed, stream_tag::mpa_order, r);
      RngStream ties_rng = RngStream::derived(cfg.seed, stream_tag::mmpa_ties, r);

      std::vector<ConfusionCounts> counts(cfg.procedures.size());
      const std::size_t K = cfg.K;
      std::vector<double> v(K), s(K), eps(K);
      std::vector<std::size_t> order(K);
      for (std::size_t p = 0; p + K <= cfg.N; p += K) {
        for (std::size_t k = 0; k < K; ++k) {
          v[k] = cohort.values[perm[p + k]];
          s[k] = (*cohort.scores)[perm[p + k]];
        }
        Pool pool{v, s};
        pool.pool_error = sample_error(model, error_rng);
        for (auto& e : eps) e = sample_error(model, error_rng);
        pool.individual_errors = eps;
        std::iota(order.begin(), order.end(), std::size_t{0});
        order_rng.shuffle(order);
        for (std::size_t t = 0; t < cfg.procedures.size(); ++t) {
          ProcedureResult res;
          switch (cfg.procedures[t]) {
            case Procedure::individual: res = run_individual(pool, threshold); break;
            case Procedure::mp: res = run_mp(pool, threshold); break;
            case Procedure::mpa: res = run_mpa(pool, order, threshold, cfg.last_sample); break;
            case Procedure::mmpa: res = run_mmpa(pool, threshold, ties_rng, cfg.last_sample); break;
          }
          counts[t] += tabulate(v, res.classifications, cfg.C);
        }
      }
      return counts;
    });
    for (std::size_t t = 0; t < cfg.procedures.size(); ++t) {
      ConfusionCounts total;
      for (const auto& rep : per_rep) total += rep[t];
      out.push_back({cfg.procedures[t], cfg.sigmas[si], accuracy_report(total)});
    }
  }
  return out;
}

enum class Metric { sens, spec, ppv, npv, misclassification };

inline std::string to_string(Metric m) {
  switch (m) {
    case Metric::sens: return "sens";
    case Metric::spec: return "spec";
    case Metric::ppv: return "ppv";
    case Metric::npv: return "npv";
    case Metric::misclassification: return "misclassification";
  }
  return "unknown";
}

struct MetricValue {
  double value = 0.0;
  double se = 0.0;
  bool defined = false;
};

inline MetricValue metric_of(const AccuracyReport& r, Metric m) {
  const auto& c = r.counts;
  std::uint64_t num = 0, den = 0;
  switch (m) {
    case Metric::sens: num = c.tp; den = c.tp + c.fn; break;
    case Metric::spec: num = c.tn; den = c.tn + c.fp; break;
    case Metric::ppv: num = c.tp; den = c.tp + c.fp; break;
    case Metric::npv: num = c.tn; den = c.tn + c.fn; break;
    case Metric::misclassification: num = c.fp + c.fn; den = c.total(); break;
  }
  if (den == 0) return {};
  return {static_cast<double>(num) / static_cast<double>(den), ratio_standard_error(num, den), true};
}

/// One asserted inequality `larger >= smaller` at a given sigma.
struct OrderingCheck {
  std::string description;
  double sigma = 0.0;
  double larger = 0.0;
  double smaller = 0.0;
  double margin = 0.0;  // 3 combined standard errors
  bool holds = false;
};

/// The accuracy orderings expected between procedures, each checked within
/// 3 combined binomial standard errors:
///   SENS_IND^2 <= SENS_MP <= SENS_IND,
///   SPEC and PPV: MPA, mMPA >= MP >= IND,
///   SENS and NPV: IND >= MP >= MPA, mMPA.
inline std::vector<OrderingCheck> accuracy_orderings(const std::vector<AccuracyCell>& cells) {
  std::vector<OrderingCheck> checks;
  std::vector<double> sigmas;
  for (const auto& c : cells) {
    if (std::find(sigmas.begin(), sigmas.end(), c.sigma) == sigmas.end()) sigmas.push_back(c.sigma);
  }
  for (double sigma : sigmas) {
    auto find = [&](Procedure p) -> const AccuracyReport* {
      for (const auto& c : cells) {
        if (c.sigma == sigma && c.procedure == p) return &c.report;
      }
      return nullptr;
    };
    auto check = [&](Metric m, Procedure big, Procedure small) {
      const auto* a = find(big);
      const auto* b = find(small);
      if (!a || !b) return;
      const auto x = metric_of(*a, m);
      const auto y = metric_of(*b, m);
      if (!x.defined || !y.defined) return;
      OrderingCheck oc;
      oc.description = to_string(m) + ": " + to_string(big) + " >= " + to_string(small);
      oc.sigma = sigma;
      oc.larger = x.value;
      oc.smaller = y.value;
      oc.margin = 3.0 * std::sqrt(x.se * x.se + y.se * y.se);
      oc.holds = x.value + oc.margin >= y.value;
      checks.push_back(oc);
    };
    using P = Procedure;
    check(Metric::sens, P::individual, P::mp);
    check(Metric::sens, P::mp, P::mpa);
    check(Metric::sens, P::mp, P::mmpa);
    check(Metric::npv, P::individual, P::mp);
    check(Metric::npv, P::mp, P::mpa);
    check(Metric::npv, P::mp, P::mmpa);
    check(Metric::spec, P::mpa, P::mp);
    check(Metric::spec, P::mmpa, P::mp);
    check(Metric::spec, P::mp, P::individual);
    check(Metric::ppv, P::mpa, P::mp);
    check(Metric::ppv, P::mmpa, P::mp);
    check(Metric::ppv, P::mp, P::individual);

    // SENS_MP >= SENS_IND^2; the square has delta-method SE 2 * SENS_IND * se
    const auto* ind = find(P::individual);
    const auto* mp = find(P::mp);
    if (ind && mp) {
      const auto si = metric_of(*ind, Metric::sens);
      const auto sm = metric_of(*mp, Metric::sens);
      if (si.defined && sm.defined) {
        OrderingCheck oc;
        oc.description = "sens: mp >= ind^2";
        oc.sigma = sigma;
        oc.larger = sm.value;
        oc.smaller = si.value * si.value;
        const double se_sq = 2.0 * si.value * si.se;
        oc.margin = 3.0 * std::sqrt(sm.se * sm.se + se_sq * se_sq);
        oc.holds = oc.larger + oc.margin >= oc.smaller;
        checks.push_back(oc);
      }
    }
  }
  return checks;
}

}  // namespace qpool

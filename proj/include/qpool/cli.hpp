#pragma once

// Subcommands behind the qpool binary. Each returns a ResultDocument.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ctime>
#include <optional>
#include <string>
#include <vector>

#include "qpool/accuracy.hpp"
#include "qpool/errors.hpp"
#include "qpool/estimators/analytic.hpp"
#include "qpool/estimators/bootstrap.hpp"
#include "qpool/estimators/cohort.hpp"
#include "qpool/estimators/monte_carlo.hpp"
#include "qpool/estimators/risk_score.hpp"
#include "qpool/io.hpp"
#include "qpool/simulate.hpp"

namespace qpool {

namespace defaults {
inline constexpr std::uint64_t seed = 1;
inline constexpr double theta = 400.0;
inline constexpr double cutoff = 1000.0;
inline constexpr double lambda = 0.25;
inline const std::vector<double> prevalence_thetas{300, 350, 400, 450, 500, 600, 700};
inline const std::vector<double> lambda_grid{0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 1.0};
inline const std::vector<double> sigma_grid{0.0, 0.05, 0.1, 0.15, 0.2, 0.25};

inline constexpr std::size_t efficiency_n = 300;
inline constexpr std::size_t efficiency_k_min = 2, efficiency_k_max = 6;
inline constexpr std::size_t efficiency_replicates = 200;

inline constexpr std::size_t prevalence_n = 2000;
inline constexpr std::size_t prevalence_k = 4;
inline constexpr std::size_t prevalence_replicates = 200;

inline constexpr std::size_t riskscore_n = 2000;
inline constexpr std::size_t riskscore_k_min = 3, riskscore_k_max = 5;
inline constexpr std::size_t riskscore_replicates = 200;

inline constexpr std::size_t error_n = 2000;
inline constexpr std::size_t error_k = 5;
inline constexpr std::size_t error_replicates = 100;

inline constexpr std::size_t analyze_k_min = 2, analyze_k_max = 10;
inline constexpr std::size_t analyze_bootstrap = 1000;
inline constexpr std::size_t analyze_bootstrap_replicates = 5;

inline constexpr std::size_t cohort_n = 2000;
inline constexpr double cohort_spearman = 0.27;
}  // namespace defaults

/// Flags shared by every subcommand; unset values fall back to the subcommand's defaults.
struct RunConfig {
  std::string command;
  std::uint64_t seed = defaults::seed;
  double theta = defaults::theta;
  double cutoff = defaults::cutoff;
  std::vector<std::size_t> pool_sizes;  // empty = subcommand default
  std::vector<double> lambdas;          // empty = subcommand default
  std::vector<double> sigmas;           // empty = subcommand default
  std::vector<double> thetas;           // empty = subcommand default
  std::optional<std::size_t> n;
  std::optional<std::size_t> replicates;  // 0 = target standard error (analyze/atr)
  std::optional<std::size_t> bootstrap;   // 0 disables bootstrap intervals (analyze)
  std::size_t bootstrap_replicates = defaults::analyze_bootstrap_replicates;
  std::vector<std::string> methods;  // empty = subcommand default
  std::string input;
  std::string output;
  Format format = Format::json;
  bool stamp = false;
  bool oracle = false;        // analyze: add a rank(V) score run
  std::string kind = "exponential";  // make-cohort: exponential or viral-load
  std::optional<double> spearman;     // make-cohort: target score correlation
  std::size_t threads = 1;
  LastSample last_sample = LastSample::deduce;
};

/// "2:6", "2-6", "2..6" or "2,3,5".
inline std::vector<std::size_t> parse_pool_sizes(const std::string& text) {
  auto to_size = [&](const std::string& s) -> std::size_t {
    std::size_t pos = 0;
    long long v = 0;
    try {
      v = std::stoll(s, &pos);
    } catch (const std::exception&) {
      throw ParameterError("cannot parse pool size '" + s + "'");
    }
    if (pos != s.size() || v < 1) throw ParameterError("pool size must be a positive integer, got '" + s + "'");
    return static_cast<std::size_t>(v);
  };
  for (const std::string sep : {"..", ":", "-"}) {
    const auto at = text.find(sep);
    if (at != std::string::npos) {
      const auto lo = to_size(text.substr(0, at));
      const auto hi = to_size(text.substr(at + sep.size()));
      if (hi < lo) throw ParameterError("pool size range '" + text + "' is empty");
      std::vector<std::size_t> out;
      for (std::size_t k = lo; k <= hi; ++k) out.push_back(k);
      return out;
    }
  }
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    out.push_back(to_size(text.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::vector<std::size_t> k_range(std::size_t lo, std::size_t hi) {
  std::vector<std::size_t> out;
  for (std::size_t k = lo; k <= hi; ++k) out.push_back(k);
  return out;
}

namespace detail {

inline std::vector<Procedure> resolve_procedures(const RunConfig& cfg, std::vector<Procedure> fallback) {
  if (cfg.methods.empty()) return fallback;
  std::vector<Procedure> out;
  for (const auto& m : cfg.methods) out.push_back(procedure_from_string(m));
  return out;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline ResultDocument new_document(const RunConfig& cfg, nlohmann::json parameters) {
  ResultDocument doc;
  doc.metadata.command = cfg.command;
  doc.metadata.seed = cfg.seed;
  doc.metadata.parameters = std::move(parameters);
  if (cfg.stamp) doc.metadata.timestamp = utc_timestamp();
  return doc;
}

inline std::vector<std::string> names_of(const std::vector<Procedure>& procs) {
  std::vector<std::string> out;
  for (auto p : procs) out.push_back(to_string(p));
  return out;
}

inline EfficiencyRecord record_of(const std::string& method, const EfficiencyEstimate& e, ParamMap params = {},
                                  std::string group = "") {
  EfficiencyRecord r;
  r.method = method;
  r.K = e.K;
  r.estimator = to_string(e.method);
  r.phi = e.phi;
  if (e.method == Method::monte_carlo) r.se = e.standard_error;
  r.ci = e.ci;
  r.group = std::move(group);
  r.params = std::move(params);
  return r;
}

// Kendall tau-a between x and y.
inline double kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double a = (x[i] - x[j]) * (y[i] - y[j]);
      s += a > 0 ? 1.0 : (a < 0 ? -1.0 : 0.0);
      ++pairs;
    }
  }
  return pairs == 0 ? 0.0 : s / static_cast<double>(pairs);
}

inline void add_optimum_scalars(ResultDocument& doc, const std::string& group_prefix, ParamMap params = {}) {
  // argmin of phi over K per method, monte-carlo rows only
  std::vector<std::string> methods;
  for (const auto& r : doc.efficiency) {
    if (r.estimator == "monte-carlo" && r.phi && r.params == params &&
        std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
      methods.push_back(r.method);
    }
  }
  for (const auto& m : methods) {
    const EfficiencyRecord* best = nullptr;
    for (const auto& r : doc.efficiency) {
      if (r.method == m && r.estimator == "monte-carlo" && r.phi && r.params == params &&
          (best == nullptr || *r.phi < *best->phi)) {
        best = &r;
      }
    }
    if (best == nullptr) continue;
    doc.scalars.push_back({"optimal_K", static_cast<double>(best->K), group_prefix + m, params, std::nullopt});
    doc.scalars.push_back({"saving", 1.0 - *best->phi, group_prefix + m, params, std::nullopt});
  }
}

}  // namespace detail

/// Efficiency of each method over a pool-size sweep, exponential values.
inline ResultDocument cmd_sim_efficiency(RunConfig cfg) {
  cfg.command = "sim-efficiency";
  const auto Ks = cfg.pool_sizes.empty() ? k_range(defaults::efficiency_k_min, defaults::efficiency_k_max)
                                         : cfg.pool_sizes;
  const double lambda = cfg.lambdas.empty() ? defaults::lambda : cfg.lambdas.front();
  const std::size_t N = cfg.n.value_or(defaults::efficiency_n);
  const std::size_t R = cfg.replicates.value_or(defaults::efficiency_replicates);
  const auto procs = detail::resolve_procedures(cfg, {Procedure::mp, Procedure::mpa, Procedure::mmpa});

  ResultDocument doc = detail::new_document(
      cfg, {{"theta", cfg.theta}, {"cutoff", cfg.cutoff}, {"lambda", lambda}, {"n", N}, {"replicates", R},
            {"pool_sizes", Ks}, {"methods", detail::names_of(procs)}});
  MonteCarloOptions opt;
  opt.replicates = R;
  opt.seed = cfg.seed;
  opt.threads = cfg.threads;
  opt.last_sample = cfg.last_sample;
  for (std::size_t K : Ks) {
    const auto est = simulated_efficiency(cfg.theta, N, lambda, K, cfg.cutoff, procs, opt);
    for (std::size_t t = 0; t < procs.size(); ++t) doc.efficiency.push_back(detail::record_of(to_string(procs[t]), est[t]));
  }
  for (std::size_t K : Ks) {
    for (Procedure p : procs) {
      if (p == Procedure::mp) doc.efficiency.push_back(detail::record_of("mp", phi_mp_analytic(K, cfg.theta, cfg.cutoff)));
      if (p == Procedure::mpa) doc.efficiency.push_back(detail::record_of("mpa", phi_mpa_analytic(K, cfg.theta, cfg.cutoff)));
    }
  }
  detail::add_optimum_scalars(doc, "");
  return doc;
}

/// Prevalence and efficiency across exponential scales at a fixed pool size.
inline ResultDocument cmd_sim_prevalence(RunConfig cfg) {
  cfg.command = "sim-prevalence";
  const auto thetas = cfg.thetas.empty() ? defaults::prevalence_thetas : cfg.thetas;
  const std::size_t K = cfg.pool_sizes.empty() ? defaults::prevalence_k : cfg.pool_sizes.front();
  const double lambda = cfg.lambdas.empty() ? defaults::lambda : cfg.lambdas.front();
  const std::size_t N = cfg.n.value_or(defaults::prevalence_n);
  const std::size_t R = cfg.replicates.value_or(defaults::prevalence_replicates);
  const auto procs = detail::resolve_procedures(
      cfg, {Procedure::individual, Procedure::mp, Procedure::mpa, Procedure::mmpa});

  ResultDocument doc = detail::new_document(
      cfg, {{"thetas", thetas}, {"cutoff", cfg.cutoff}, {"pool_size", K}, {"lambda", lambda}, {"n", N},
            {"replicates", R}, {"methods", detail::names_of(procs)}});
  MonteCarloOptions opt;
  opt.replicates = R;
  opt.seed = cfg.seed;
  opt.threads = cfg.threads;
  opt.last_sample = cfg.last_sample;
  for (double theta : thetas) {
    const ParamMap params{{"theta", theta}};
    auto prev = parallel_map<double>(R, cfg.threads, [&](std::size_t r) {
      return exponential_cohort(theta, N, lambda, cfg.seed, r).prevalence(cfg.cutoff);
    });
    double mean = 0.0;
    for (double p : prev) mean += p;
    mean /= static_cast<double>(R);
    doc.scalars.push_back({"prevalence", mean, "", params, std::nullopt});
    doc.scalars.push_back({"prevalence_analytic", std::exp(-cfg.cutoff / theta), "", params, std::nullopt});
    const auto est = simulated_efficiency(theta, N, lambda, K, cfg.cutoff, procs, opt);
    for (std::size_t t = 0; t < procs.size(); ++t) {
      doc.efficiency.push_back(detail::record_of(to_string(procs[t]), est[t], params));
    }
  }
  return doc;
}

/// Score correlation and mMPA efficiency across score strengths.
inline ResultDocument cmd_sim_riskscore(RunConfig cfg) {
  cfg.command = "sim-riskscore";
  const auto lambdas = cfg.lambdas.empty() ? defaults::lambda_grid : cfg.lambdas;
  const auto Ks = cfg.pool_sizes.empty() ? k_range(defaults::riskscore_k_min, defaults::riskscore_k_max)
                                         : cfg.pool_sizes;
  const std::size_t N = cfg.n.value_or(defaults::riskscore_n);
  const std::size_t R = cfg.replicates.value_or(defaults::riskscore_replicates);

  ResultDocument doc = detail::new_document(
      cfg, {{"theta", cfg.theta}, {"cutoff", cfg.cutoff}, {"lambdas", lambdas}, {"pool_sizes", Ks}, {"n", N},
            {"replicates", R}});
  MonteCarloOptions opt;
  opt.replicates = R;
  opt.seed = cfg.seed;
  opt.threads = cfg.threads;
  opt.last_sample = cfg.last_sample;
  for (double lambda : lambdas) {
    const ParamMap params{{"lambda", lambda}};
    auto rho = parallel_map<double>(R, cfg.threads, [&](std::size_t r) {
      const Cohort c = exponential_cohort(cfg.theta, N, lambda, cfg.seed, r);
      return spearman(c.values, *c.scores);
    });
    double mean = 0.0;
    for (double x : rho) mean += x;
    doc.scalars.push_back({"spearman", mean / static_cast<double>(R), "", params, std::nullopt});
    for (std::size_t K : Ks) {
      const auto est = simulated_efficiency(cfg.theta, N, lambda, K, cfg.cutoff, {Procedure::mmpa}, opt);
      doc.efficiency.push_back(detail::record_of("mmpa", est.front(), params));
    }
  }
  for (std::size_t K : Ks) {
    std::vector<double> x, y;
    for (const auto& r : doc.efficiency) {
      if (r.K == K) {
        x.push_back(r.params.at("lambda"));
        y.push_back(*r.phi);
      }
    }
    doc.scalars.push_back({"kendall_tau_lambda_phi", detail::kendall_tau(x, y), "mmpa",
                           {{"K", static_cast<double>(K)}}, std::nullopt});
  }
  return doc;
}

/// Accuracy of each procedure across the measurement-error grid.
inline ResultDocument cmd_sim_error(RunConfig cfg) {
  cfg.command = "sim-error";
  AccuracyConfig acc;
  acc.theta = cfg.theta;
  acc.C = cfg.cutoff;
  acc.K = cfg.pool_sizes.empty() ? defaults::error_k : cfg.pool_sizes.front();
  acc.sigmas = cfg.sigmas.empty() ? defaults::sigma_grid : cfg.sigmas;
  acc.procedures = detail::resolve_procedures(
      cfg, {Procedure::individual, Procedure::mp, Procedure::mpa, Procedure::mmpa});
  acc.N = cfg.n.value_or(defaults::error_n);
  acc.R = cfg.replicates.value_or(defaults::error_replicates);
  acc.seed = cfg.seed;
  acc.lambda = cfg.lambdas.empty() ? defaults::lambda : cfg.lambdas.front();
  acc.threads = cfg.threads;

  ResultDocument doc = detail::new_document(
      cfg, {{"theta", acc.theta}, {"cutoff", acc.C}, {"pool_size", acc.K}, {"sigmas", acc.sigmas},
            {"lambda", acc.lambda}, {"n", acc.N}, {"replicates", acc.R},
            {"methods", detail::names_of(acc.procedures)}});
  const auto cells = accuracy_experiment(acc);
  for (const auto& c : cells) doc.accuracy.push_back({to_string(c.procedure), acc.K, c.sigma, c.report});
  std::size_t violations = 0;
  for (const auto& chk : accuracy_orderings(cells)) {
    if (!chk.holds) ++violations;
    doc.scalars.push_back({"ordering_holds", chk.holds ? 1.0 : 0.0, chk.description, {{"sigma", chk.sigma}},
                           std::nullopt});
  }
  doc.scalars.push_back({"ordering_violations", static_cast<double>(violations), "", {}, std::nullopt});
  return doc;
}

/// Efficiency of each method on a cohort over a pool-size sweep, with paired
/// bootstrap intervals and the differences mp - mmpa and mpa - mmpa.
inline ResultDocument cmd_analyze(RunConfig cfg, const Cohort& cohort) {
  cfg.command = "analyze";
  cohort.validate();
  const auto Ks = cfg.pool_sizes.empty() ? k_range(defaults::analyze_k_min, defaults::analyze_k_max)
                                         : cfg.pool_sizes;
  const std::size_t B = cfg.bootstrap.value_or(defaults::analyze_bootstrap);
  const std::size_t R = cfg.replicates.value_or(0);
  const auto requested = detail::resolve_procedures(cfg, {Procedure::mp, Procedure::mpa, Procedure::mmpa});
  const std::size_t k_max = *std::max_element(Ks.begin(), Ks.end());
  if (cohort.size() < k_max) {
    throw DataError("cohort of " + std::to_string(cohort.size()) + " is smaller than the largest pool size " +
                    std::to_string(k_max));
  }
  if (B != 0 && B < 100) throw ParameterError("--bootstrap must be 0 or >= 100");

  std::vector<Procedure> procs;
  bool mmpa_missing = false;
  for (Procedure p : requested) {
    if (p == Procedure::mmpa && !cohort.has_scores()) {
      mmpa_missing = true;
    } else {
      procs.push_back(p);
    }
  }
  const bool oracle = cfg.oracle;
  const bool has_mmpa = std::find(procs.begin(), procs.end(), Procedure::mmpa) != procs.end();

  ResultDocument doc = detail::new_document(
      cfg, {{"input", cfg.input}, {"cutoff", cfg.cutoff}, {"pool_sizes", Ks}, {"bootstrap", B},
            {"replicates", R}, {"bootstrap_replicates", cfg.bootstrap_replicates},
            {"methods", detail::names_of(requested)}, {"oracle", oracle}, {"n", cohort.size()}});

  auto with_oracle_scores = [](const Cohort& c) {
    Cohort o(c.values, c.values);
    return o;
  };
  std::vector<std::string> names = detail::names_of(procs);
  if (oracle) names.push_back("mmpa-oracle");

  for (std::size_t K : Ks) {
    MonteCarloOptions opt;
    opt.replicates = R;
    opt.seed = cfg.seed;
    opt.threads = cfg.threads;
    opt.last_sample = cfg.last_sample;
    auto estimate = [&](const Cohort& c, const MonteCarloOptions& o) {
      std::vector<EfficiencyEstimate> est;
      if (!procs.empty()) est = phi_monte_carlo_joint(c, K, cfg.cutoff, procs, o);
      if (oracle) est.push_back(phi_monte_carlo(with_oracle_scores(c), K, cfg.cutoff, Procedure::mmpa, o));
      return est;
    };
    auto point = estimate(cohort, opt);

    std::optional<BootstrapResult> boot;
    std::vector<std::pair<std::size_t, std::size_t>> diffs;
    if (B > 0 && !point.empty()) {
      auto idx = [&](Procedure p) -> std::ptrdiff_t {
        const auto it = std::find(procs.begin(), procs.end(), p);
        return it == procs.end() ? -1 : it - procs.begin();
      };
      if (has_mmpa) {
        const auto m = static_cast<std::size_t>(idx(Procedure::mmpa));
        if (idx(Procedure::mp) >= 0) diffs.push_back({static_cast<std::size_t>(idx(Procedure::mp)), m});
        if (idx(Procedure::mpa) >= 0) diffs.push_back({static_cast<std::size_t>(idx(Procedure::mpa)), m});
      }
      MonteCarloOptions inner = opt;
      inner.replicates = cfg.bootstrap_replicates;
      inner.threads = 1;
      BootstrapOptions bopt;
      bopt.resamples = B;
      bopt.seed = detail::mix64(cfg.seed ^ stream_tag::bootstrap ^ K);
      bopt.threads = cfg.threads;
      MultiStatistic stat = [&](const Cohort& c) {
        std::vector<double> out;
        for (const auto& e : estimate(c, inner)) out.push_back(e.phi);
        return out;
      };
      boot = bootstrap(cohort, stat, point.size(), diffs, bopt);
    }
    for (std::size_t t = 0; t < point.size(); ++t) {
      auto rec = detail::record_of(names[t], point[t]);
      if (boot) rec.ci = boot->intervals[t];
      doc.efficiency.push_back(rec);
    }
    if (mmpa_missing) {
      EfficiencyRecord rec;
      rec.method = "mmpa";
      rec.K = K;
      rec.estimator = "monte-carlo";
      rec.error = "cohort has no risk scores";
      doc.efficiency.push_back(rec);
    }
    if (boot) {
      for (std::size_t i = 0; i < diffs.size(); ++i) {
        doc.scalars.push_back({"phi_difference", boot->difference_estimates[i],
                               names[diffs[i].first] + "-" + names[diffs[i].second],
                               {{"K", static_cast<double>(K)}}, boot->difference_intervals[i]});
      }
    }
  }
  detail::add_optimum_scalars(doc, "");
  return doc;
}

/// Assays per 100 individuals for one method over a pool-size sweep.
inline ResultDocument cmd_atr(RunConfig cfg, const Cohort& cohort) {
  cfg.command = "atr";
  const auto Ks = cfg.pool_sizes.empty() ? k_range(defaults::analyze_k_min, defaults::analyze_k_max)
                                         : cfg.pool_sizes;
  const auto procs = detail::resolve_procedures(cfg, {Procedure::mmpa});
  if (procs.size() != 1) throw ParameterError("atr takes exactly one method");
  const std::size_t R = cfg.replicates.value_or(0);
  ResultDocument doc = detail::new_document(
      cfg, {{"input", cfg.input}, {"cutoff", cfg.cutoff}, {"pool_sizes", Ks}, {"replicates", R},
            {"methods", detail::names_of(procs)}});
  for (std::size_t K : Ks) {
    MonteCarloOptions opt;
    opt.replicates = R;
    opt.seed = cfg.seed;
    opt.threads = cfg.threads;
    opt.last_sample = cfg.last_sample;
    const auto e = phi_monte_carlo(cohort, K, cfg.cutoff, procs.front(), opt);
    doc.efficiency.push_back(detail::record_of(to_string(procs.front()), e));
    doc.scalars.push_back({"atr_per_100", 100.0 * e.phi, to_string(procs.front()),
                           {{"K", static_cast<double>(K)}}, std::nullopt});
  }
  return doc;
}

/// Two-column text table of atr output.
inline std::string atr_table(const ResultDocument& doc) {
  std::string out = "K\tATR\n";
  for (const auto& s : doc.scalars) {
    if (s.name != "atr_per_100") continue;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%zu\t%.2f\n", static_cast<std::size_t>(s.params.at("K")), s.value);
    out += buf;
  }
  return out;
}

/// Synthetic cohort: exponential values with a lambda score, or the
/// viral-load mixture with a score matched to a target Spearman correlation.
inline Cohort cmd_make_cohort(const RunConfig& cfg) {
  const std::size_t N = cfg.n.value_or(defaults::cohort_n);
  if (cfg.kind == "exponential") {
    if (cfg.spearman) {
      RngStream value_rng = RngStream::derived(cfg.seed, stream_tag::cohort, 0);
      Cohort c(sample_exponential(cfg.theta, N, value_rng));
      const std::uint64_t score_seed = detail::mix64(cfg.seed ^ stream_tag::score);
      const double lambda = calibrate_lambda(c.values, *cfg.spearman, score_seed);
      RngStream score_rng(score_seed, 0);
      c.scores = make_risk_score(c.values, lambda, score_rng);
      return c;
    }
    const double lambda = cfg.lambdas.empty() ? defaults::lambda : cfg.lambdas.front();
    return exponential_cohort(cfg.theta, N, lambda, cfg.seed, 0);
  }
  if (cfg.kind == "viral-load") {
    ViralLoadModel m;
    m.cutoff = cfg.cutoff;
    return viral_load_cohort(N, cfg.spearman.value_or(defaults::cohort_spearman), cfg.seed, m);
  }
  throw ParameterError("unknown cohort kind '" + cfg.kind + "' (expected exponential or viral-load)");
}

}  // namespace qpool

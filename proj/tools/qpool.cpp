// qpool: simulation studies and cohort analysis for pooled quantitative testing.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qpool/qpool.hpp"

namespace {

std::string join(const std::vector<double>& v) {
  std::string out;
  for (double x : v) {
    if (!out.empty()) out += ',';
    out += qpool::format_number(x);
  }
  return out;
}

std::string range_text(std::size_t lo, std::size_t hi) { return std::to_string(lo) + ":" + std::to_string(hi); }

struct Flags {
  qpool::RunConfig cfg;
  std::string pool_size;
  std::string pool_size_range;
  std::vector<double> lambdas;
  std::vector<double> sigmas;
  std::vector<double> thetas;
  std::size_t n = 0;
  std::size_t replicates = 0;
  std::size_t bootstrap = 0;
  std::string methods;
  std::string format = "json";
  std::string last_sample = "deduce";
  double spearman = 0.0;
};

struct Defaults {
  std::string pool_sizes;
  std::string lambdas;
  std::string methods;
  std::size_t n = 0;
  std::size_t replicates = 0;
};

void add_common(CLI::App* sub, Flags& f, const Defaults& d) {
  sub->add_option("--seed", f.cfg.seed, "Master random seed")->default_val(qpool::defaults::seed);
  sub->add_option("--theta", f.cfg.theta, "Exponential scale of simulated assay values")
      ->default_val(qpool::defaults::theta);
  sub->add_option("--cutoff", f.cfg.cutoff, "Failure cutoff C")->default_val(qpool::defaults::cutoff);
  sub->add_option("--pool-size", f.pool_size, "Pool size K (or a list such as 3,4,5)")
      ->default_str(d.pool_sizes);
  sub->add_option("--pool-size-range", f.pool_size_range, "Pool size range lo:hi (also lo-hi, lo..hi)")
      ->default_str(d.pool_sizes);
  if (!d.lambdas.empty()) {
    sub->add_option("--lambda", f.lambdas, "Risk score strength(s) in [0, 1]")->delimiter(',')->default_str(d.lambdas);
  }
  sub->add_option("--n", f.n, "Cohort size")->default_str(std::to_string(d.n));
  sub->add_option("--replicates", f.replicates, "Monte Carlo replicates (0 = target SE 0.005)")
      ->default_str(std::to_string(d.replicates));
  if (!d.methods.empty()) {
    sub->add_option("--methods", f.methods, "Comma-separated procedures: ind, mp, mpa, mmpa")->default_str(d.methods);
  }
  sub->add_option("--output", f.cfg.output, "Output file (default: stdout)");
  sub->add_option("--format", f.format, "Output format")->check(CLI::IsMember({"json", "csv"}))->default_str("json");
  sub->add_flag("--stamp", f.cfg.stamp, "Record a UTC timestamp in the run metadata");
  sub->add_option("--threads", f.cfg.threads, "Worker threads (0 = all cores); results do not depend on it")
      ->default_val(1);
  sub->add_option("--last-sample", f.last_sample,
                  "MPA/mMPA last member: deduce from the remainder or test it")
      ->check(CLI::IsMember({"deduce", "test"}))
      ->default_str("deduce");
}

void finalize(Flags& f, CLI::App* sub) {
  auto& c = f.cfg;
  if (!f.pool_size.empty() && !f.pool_size_range.empty()) {
    throw qpool::ParameterError("use either --pool-size or --pool-size-range");
  }
  if (!f.pool_size.empty()) c.pool_sizes = qpool::parse_pool_sizes(f.pool_size);
  if (!f.pool_size_range.empty()) c.pool_sizes = qpool::parse_pool_sizes(f.pool_size_range);
  c.lambdas = f.lambdas;
  c.sigmas = f.sigmas;
  c.thetas = f.thetas;
  if (sub->count("--n") > 0) c.n = f.n;
  if (sub->count("--replicates") > 0) c.replicates = f.replicates;
  if (sub->get_option_no_throw("--bootstrap") != nullptr && sub->count("--bootstrap") > 0) c.bootstrap = f.bootstrap;
  if (sub->get_option_no_throw("--spearman") != nullptr && sub->count("--spearman") > 0) c.spearman = f.spearman;
  c.methods.clear();
  std::stringstream ss(f.methods);
  for (std::string m; std::getline(ss, m, ',');) {
    if (!m.empty()) c.methods.push_back(m);
  }
  c.format = qpool::format_from_string(f.format);
  c.last_sample = f.last_sample == "test" ? qpool::LastSample::test : qpool::LastSample::deduce;
  for (double l : c.lambdas) {
    if (!(l >= 0.0 && l <= 1.0)) throw qpool::ParameterError("--lambda values must lie in [0, 1]");
  }
  for (double s : c.sigmas) {
    if (!(s >= 0.0)) throw qpool::ParameterError("--sigma-grid values must be >= 0");
  }
  if (c.n && *c.n == 0) throw qpool::ParameterError("--n must be >= 1");
  if (c.replicates && *c.replicates == 0 && c.command.rfind("sim-", 0) == 0) {
    throw qpool::ParameterError("--replicates must be >= 1 for simulation studies");
  }
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw qpool::DataError("cannot write output to '" + path + "'");
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pooled testing for quantitative assays: MP, MPA and marker-assisted MPA"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  Flags f;
  using qpool::defaults::lambda;

  auto* eff = app.add_subcommand("sim-efficiency", "Efficiency of mp/mpa/mmpa over pool sizes (exponential values)");
  add_common(eff, f, {range_text(qpool::defaults::efficiency_k_min, qpool::defaults::efficiency_k_max),
                      qpool::format_number(lambda), "mp,mpa,mmpa", qpool::defaults::efficiency_n,
                      qpool::defaults::efficiency_replicates});

  auto* prev = app.add_subcommand("sim-prevalence", "Prevalence and efficiency across exponential scales");
  add_common(prev, f, {std::to_string(qpool::defaults::prevalence_k), qpool::format_number(lambda),
                       "ind,mp,mpa,mmpa", qpool::defaults::prevalence_n, qpool::defaults::prevalence_replicates});
  prev->add_option("--theta-grid", f.thetas, "Exponential scales to sweep")
      ->delimiter(',')
      ->default_str(join(qpool::defaults::prevalence_thetas));

  auto* risk = app.add_subcommand("sim-riskscore", "Score correlation and mmpa efficiency across score strengths");
  add_common(risk, f, {range_text(qpool::defaults::riskscore_k_min, qpool::defaults::riskscore_k_max),
                       join(qpool::defaults::lambda_grid), "", qpool::defaults::riskscore_n,
                       qpool::defaults::riskscore_replicates});

  auto* err = app.add_subcommand("sim-error", "Diagnostic accuracy under log-normal measurement error");
  add_common(err, f, {std::to_string(qpool::defaults::error_k), qpool::format_number(lambda), "ind,mp,mpa,mmpa",
                      qpool::defaults::error_n, qpool::defaults::error_replicates});
  err->add_option("--sigma-grid", f.sigmas, "Log-scale error standard deviations")
      ->delimiter(',')
      ->default_str(join(qpool::defaults::sigma_grid));

  auto* ana = app.add_subcommand("analyze", "Efficiency with bootstrap intervals on a cohort file");
  add_common(ana, f, {range_text(qpool::defaults::analyze_k_min, qpool::defaults::analyze_k_max), "",
                      "mp,mpa,mmpa", 0, 0});
  ana->add_option("--input", f.cfg.input, "Cohort CSV with columns id,v[,s]")->required();
  ana->add_option("--bootstrap", f.bootstrap, "Bootstrap resamples (0 = none)")
      ->default_str(std::to_string(qpool::defaults::analyze_bootstrap));
  ana->add_option("--bootstrap-replicates", f.cfg.bootstrap_replicates, "Monte Carlo replicates per resample")
      ->default_val(qpool::defaults::analyze_bootstrap_replicates)
      ->check(CLI::PositiveNumber);
  ana->add_flag("--oracle", f.cfg.oracle, "Also run mmpa with the oracle score rank(v)");

  auto* atr = app.add_subcommand("atr", "Average assays per 100 individuals for one method");
  add_common(atr, f, {range_text(qpool::defaults::analyze_k_min, qpool::defaults::analyze_k_max), "", "mmpa", 0, 0});
  atr->add_option("--input", f.cfg.input, "Cohort CSV with columns id,v[,s]")->required();

  auto* mk = app.add_subcommand("make-cohort", "Write a synthetic cohort CSV");
  add_common(mk, f, {"", qpool::format_number(lambda), "", qpool::defaults::cohort_n, 0});
  mk->add_option("--kind", f.cfg.kind, "Value model")
      ->check(CLI::IsMember({"exponential", "viral-load"}))
      ->default_str("exponential");
  mk->add_option("--spearman", f.spearman, "Target score correlation (viral-load default 0.27)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    f.cfg.command = sub->get_name();
    finalize(f, sub);
    auto& cfg = f.cfg;
    qpool::ResultDocument doc;
    const std::string name = sub->get_name();
    if (name == "make-cohort") {
      std::ostringstream out;
      qpool::write_cohort(out, qpool::cmd_make_cohort(cfg));
      emit(out.str(), cfg.output);
      return 0;
    }
    if (name == "sim-efficiency") doc = qpool::cmd_sim_efficiency(cfg);
    if (name == "sim-prevalence") doc = qpool::cmd_sim_prevalence(cfg);
    if (name == "sim-riskscore") doc = qpool::cmd_sim_riskscore(cfg);
    if (name == "sim-error") doc = qpool::cmd_sim_error(cfg);
    if (name == "analyze") doc = qpool::cmd_analyze(cfg, qpool::read_cohort(cfg.input));
    if (name == "atr") {
      doc = qpool::cmd_atr(cfg, qpool::read_cohort(cfg.input));
      if (cfg.output.empty()) {
        std::cout << qpool::atr_table(doc);
        return 0;
      }
    }
    emit(qpool::render(doc, cfg.format), cfg.output);
    return 0;
  } catch (const qpool::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return qpool::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
}

#pragma once

// Cohort CSV ingestion and result documents (JSON and flat CSV).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"
#include "qpool/accuracy.hpp"
#include "qpool/errors.hpp"
#include "qpool/estimators/analytic.hpp"
#include "qpool/estimators/cohort.hpp"

namespace qpool {

struct CohortReadOptions {
  char delimiter = ',';
  bool has_header = true;
  std::string id_column = "id";
  std::string value_column = "v";
  std::string score_column = "s";
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Splits one line; double quotes group a field and "" is a literal quote.
inline std::vector<std::string> split_fields(const std::string& line, char delim, std::size_t row) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      out.push_back(trim(field));
      field.clear();
    } else {
      field += c;
    }
  }
  if (quoted) throw CohortFormatError(row, "*", "unterminated quoted field");
  out.push_back(trim(field));
  return out;
}

inline double parse_number(const std::string& text, std::size_t row, const std::string& column) {
  if (text.empty()) throw CohortFormatError(row, column, "missing value");
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw CohortFormatError(row, column, "cannot parse '" + text + "' as a number");
  if (!std::isfinite(v)) throw CohortFormatError(row, column, "value '" + text + "' is not finite");
  return v;
}

}  // namespace detail

/// Parses cohort CSV text. Data rows are numbered from 1.
inline Cohort parse_cohort(std::istream& in, const CohortReadOptions& opt = {}) {
  std::string line;
  std::ptrdiff_t id_col = -1, v_col = -1, s_col = -1;
  std::size_t n_cols = 0;
  std::vector<std::vector<std::string>> rows;

  bool header_done = !opt.has_header;
  if (!opt.has_header) {
    id_col = 0;
    v_col = 1;
    s_col = 2;
  }
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    if (!header_done) {
      const auto names = detail::split_fields(line, opt.delimiter, 0);
      for (std::size_t c = 0; c < names.size(); ++c) {
        if (names[c] == opt.id_column) id_col = static_cast<std::ptrdiff_t>(c);
        if (names[c] == opt.value_column) v_col = static_cast<std::ptrdiff_t>(c);
        if (names[c] == opt.score_column) s_col = static_cast<std::ptrdiff_t>(c);
      }
      if (v_col < 0) throw CohortFormatError(0, opt.value_column, "header has no value column");
      n_cols = names.size();
      header_done = true;
      continue;
    }
    rows.push_back(detail::split_fields(line, opt.delimiter, rows.size() + 1));
  }
  if (rows.empty()) throw DataError("cohort file has no data rows");
  if (!opt.has_header) {
    n_cols = rows.front().size();
    if (n_cols < 2) throw CohortFormatError(1, opt.value_column, "expected at least the id and value columns");
    if (n_cols < 3) s_col = -1;
  }

  Cohort cohort;
  std::vector<double> scores;
  std::size_t with_score = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t row = r + 1;
    const auto& f = rows[r];
    if (f.size() != n_cols) {
      throw CohortFormatError(row, "*", "expected " + std::to_string(n_cols) + " fields, found " +
                                            std::to_string(f.size()));
    }
    const double v = detail::parse_number(f[static_cast<std::size_t>(v_col)], row, opt.value_column);
    if (v < 0.0) throw CohortFormatError(row, opt.value_column, "assay value must be >= 0");
    cohort.values.push_back(v);
    if (id_col >= 0) cohort.ids.push_back(f[static_cast<std::size_t>(id_col)]);
    if (s_col >= 0) {
      const auto& text = f[static_cast<std::size_t>(s_col)];
      if (!text.empty()) {
        if (with_score != r) throw CohortFormatError(row, opt.score_column, "score present here but missing above");
        scores.push_back(detail::parse_number(text, row, opt.score_column));
        ++with_score;
      } else if (with_score > 0) {
        throw CohortFormatError(row, opt.score_column, "missing score while earlier rows have one");
      }
    }
  }
  if (with_score > 0) cohort.scores = std::move(scores);
  cohort.validate();
  return cohort;
}

inline Cohort read_cohort(const std::string& path, const CohortReadOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open cohort file '" + path + "'");
  return parse_cohort(in, opt);
}

/// Shortest text that reads back to the same double.
inline std::string format_number(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

inline void write_cohort(std::ostream& out, const Cohort& cohort) {
  cohort.validate();
  out << "id,v" << (cohort.has_scores() ? ",s" : "") << '\n';
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    out << (cohort.ids.empty() ? std::to_string(i + 1) : cohort.ids[i]) << ',' << format_number(cohort.values[i]);
    if (cohort.has_scores()) out << ',' << format_number((*cohort.scores)[i]);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Result documents

inline constexpr const char* kSchemaVersion = "1";

using ParamMap = std::map<std::string, double>;

struct RunMetadata {
  std::string command;
  std::uint64_t seed = 0;
  nlohmann::json parameters = nlohmann::json::object();
  std::optional<std::string> timestamp;
  bool operator==(const RunMetadata&) const = default;
};

struct EfficiencyRecord {
  std::string method;     // ind, mp, mpa, mmpa, ...
  std::size_t K = 0;
  std::string estimator;  // analytic, convolution, beta-formula, monte-carlo
  std::optional<double> phi;
  std::optional<double> se;
  std::optional<Interval> ci;
  std::string group;
  ParamMap params;
  std::optional<std::string> error;
  bool operator==(const EfficiencyRecord&) const = default;
};

struct AccuracyRecord {
  std::string method;
  std::size_t K = 0;
  double sigma = 0.0;
  AccuracyReport report;
  bool operator==(const AccuracyRecord&) const = default;
};

struct ScalarRecord {
  std::string name;
  double value = 0.0;
  std::string group;
  ParamMap params;
  std::optional<Interval> ci;
  bool operator==(const ScalarRecord&) const = default;
};

struct ResultDocument {
  std::string schema_version = kSchemaVersion;
  RunMetadata metadata;
  std::vector<EfficiencyRecord> efficiency;
  std::vector<AccuracyRecord> accuracy;
  std::vector<ScalarRecord> scalars;
  bool operator==(const ResultDocument&) const = default;
};

namespace detail {

template <typename T>
nlohmann::json opt_json(const std::optional<T>& x) {
  return x ? nlohmann::json(*x) : nlohmann::json(nullptr);
}

inline nlohmann::json interval_json(const std::optional<Interval>& ci) {
  if (!ci) return nullptr;
  return nlohmann::json::array({ci->lower, ci->upper});
}

template <typename T>
std::optional<T> json_opt(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

inline std::optional<Interval> json_interval(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  const auto& a = j.at(key);
  return Interval{a.at(0).get<double>(), a.at(1).get<double>()};
}

inline ParamMap json_params(const nlohmann::json& j) {
  ParamMap m;
  if (j.contains("params")) {
    for (auto it = j.at("params").begin(); it != j.at("params").end(); ++it) m[it.key()] = it.value().get<double>();
  }
  return m;
}

}  // namespace detail

inline nlohmann::json to_json(const ResultDocument& doc) {
  using nlohmann::json;
  json j;
  j["schema_version"] = doc.schema_version;
  json meta;
  meta["command"] = doc.metadata.command;
  meta["seed"] = doc.metadata.seed;
  meta["parameters"] = doc.metadata.parameters;
  if (doc.metadata.timestamp) meta["timestamp"] = *doc.metadata.timestamp;
  j["metadata"] = meta;

  json eff = json::array();
  for (const auto& r : doc.efficiency) {
    json e;
    e["method"] = r.method;
    e["K"] = r.K;
    e["estimator"] = r.estimator;
    e["phi"] = detail::opt_json(r.phi);
    e["se"] = detail::opt_json(r.se);
    e["ci"] = detail::interval_json(r.ci);
    e["group"] = r.group;
    e["params"] = r.params;
    if (r.error) e["error"] = *r.error;
    eff.push_back(e);
  }
  j["efficiency"] = eff;

  json acc = json::array();
  for (const auto& r : doc.accuracy) {
    const auto& c = r.report.counts;
    json a;
    a["method"] = r.method;
    a["K"] = r.K;
    a["sigma"] = r.sigma;
    a["counts"] = {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
    a["sens"] = detail::opt_json(r.report.sens);
    a["spec"] = detail::opt_json(r.report.spec);
    a["ppv"] = detail::opt_json(r.report.ppv);
    a["npv"] = detail::opt_json(r.report.npv);
    a["misclassification"] = detail::opt_json(r.report.misclassification);
    acc.push_back(a);
  }
  j["accuracy"] = acc;

  json sc = json::array();
  for (const auto& r : doc.scalars) {
    json s;
    s["name"] = r.name;
    s["value"] = r.value;
    s["group"] = r.group;
    s["params"] = r.params;
    s["ci"] = detail::interval_json(r.ci);
    sc.push_back(s);
  }
  j["scalars"] = sc;
  return j;
}

inline ResultDocument result_from_json(const nlohmann::json& j) {
  try {
    ResultDocument doc;
    doc.schema_version = j.at("schema_version").get<std::string>();
    if (doc.schema_version != kSchemaVersion) {
      throw DataError("unsupported result schema_version '" + doc.schema_version + "'");
    }
    const auto& meta = j.at("metadata");
    doc.metadata.command = meta.at("command").get<std::string>();
    doc.metadata.seed = meta.at("seed").get<std::uint64_t>();
    doc.metadata.parameters = meta.at("parameters");
    doc.metadata.timestamp = detail::json_opt<std::string>(meta, "timestamp");
    for (const auto& e : j.at("efficiency")) {
      EfficiencyRecord r;
      r.method = e.at("method").get<std::string>();
      r.K = e.at("K").get<std::size_t>();
      r.estimator = e.at("estimator").get<std::string>();
      r.phi = detail::json_opt<double>(e, "phi");
      r.se = detail::json_opt<double>(e, "se");
      r.ci = detail::json_interval(e, "ci");
      r.group = e.at("group").get<std::string>();
      r.params = detail::json_params(e);
      r.error = detail::json_opt<std::string>(e, "error");
      doc.efficiency.push_back(std::move(r));
    }
    for (const auto& a : j.at("accuracy")) {
      AccuracyRecord r;
      r.method = a.at("method").get<std::string>();
      r.K = a.at("K").get<std::size_t>();
      r.sigma = a.at("sigma").get<double>();
      const auto& c = a.at("counts");
      r.report.counts = {c.at("tp").get<std::uint64_t>(), c.at("fp").get<std::uint64_t>(),
                         c.at("tn").get<std::uint64_t>(), c.at("fn").get<std::uint64_t>()};
      r.report.sens = detail::json_opt<double>(a, "sens");
      r.report.spec = detail::json_opt<double>(a, "spec");
      r.report.ppv = detail::json_opt<double>(a, "ppv");
      r.report.npv = detail::json_opt<double>(a, "npv");
      r.report.misclassification = detail::json_opt<double>(a, "misclassification");
      doc.accuracy.push_back(std::move(r));
    }
    for (const auto& s : j.at("scalars")) {
      ScalarRecord r;
      r.name = s.at("name").get<std::string>();
      r.value = s.at("value").get<double>();
      r.group = s.at("group").get<std::string>();
      r.params = detail::json_params(s);
      r.ci = detail::json_interval(s, "ci");
      doc.scalars.push_back(std::move(r));
    }
    return doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed result document: ") + e.what());
  }
}

enum class Format { json, csv };

inline Format format_from_string(const std::string& s) {
  if (s == "json") return Format::json;
  if (s == "csv") return Format::csv;
  throw ParameterError("unknown output format '" + s + "' (expected json or csv)");
}

inline std::string to_json_text(const ResultDocument& doc) { return to_json(doc).dump(2) + "\n"; }

inline ResultDocument parse_result_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("result document is not valid JSON: ") + e.what());
  }
  return result_from_json(j);
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string params_text(const ParamMap& p) {
  std::string out;
  for (const auto& [k, v] : p) {
    if (!out.empty()) out += ';';
    out += k + "=" + format_number(v);
  }
  return out;
}

}  // namespace detail

inline constexpr const char* kCsvHeader = "record,group,method,K,estimator,params,statistic,value,note";

/// One row per (record, statistic) with a fixed column order.
inline std::string to_csv_text(const ResultDocument& doc) {
  std::ostringstream out;
  out << kCsvHeader << '\n';
  auto row = [&](const std::string& record, const std::string& group, const std::string& method,
                 const std::string& K, const std::string& estimator, const std::string& params,
                 const std::string& statistic, const std::string& value, const std::string& note) {
    out << record << ',' << detail::csv_field(group) << ',' << detail::csv_field(method) << ',' << K << ','
        << estimator << ',' << detail::csv_field(params) << ',' << statistic << ',' << value << ','
        << detail::csv_field(note) << '\n';
  };
  for (const auto& r : doc.efficiency) {
    const auto K = std::to_string(r.K);
    const auto params = detail::params_text(r.params);
    if (r.error) {
      row("efficiency", r.group, r.method, K, r.estimator, params, "phi", "", *r.error);
      continue;
    }
    if (r.phi) row("efficiency", r.group, r.method, K, r.estimator, params, "phi", format_number(*r.phi), "");
    if (r.se) row("efficiency", r.group, r.method, K, r.estimator, params, "se", format_number(*r.se), "");
    if (r.ci) {
      row("efficiency", r.group, r.method, K, r.estimator, params, "ci_lower", format_number(r.ci->lower), "");
      row("efficiency", r.group, r.method, K, r.estimator, params, "ci_upper", format_number(r.ci->upper), "");
    }
  }
  for (const auto& r : doc.accuracy) {
    const auto K = std::to_string(r.K);
    const auto params = detail::params_text({{"sigma", r.sigma}});
    const auto& c = r.report.counts;
    const std::pair<const char*, std::optional<double>> metrics[] = {
        {"sens", r.report.sens}, {"spec", r.report.spec}, {"ppv", r.report.ppv},
        {"npv", r.report.npv}, {"misclassification", r.report.misclassification}};
    for (const auto& [name, value] : metrics) {
      row("accuracy", "", r.method, K, "", params, name, value ? format_number(*value) : "", value ? "" : "undefined");
    }
    row("accuracy", "", r.method, K, "", params, "tp", std::to_string(c.tp), "");
    row("accuracy", "", r.method, K, "", params, "fp", std::to_string(c.fp), "");
    row("accuracy", "", r.method, K, "", params, "tn", std::to_string(c.tn), "");
    row("accuracy", "", r.method, K, "", params, "fn", std::to_string(c.fn), "");
  }
  for (const auto& r : doc.scalars) {
    const auto params = detail::params_text(r.params);
    row("scalar", r.group, "", "", "", params, r.name, format_number(r.value), "");
    if (r.ci) {
      row("scalar", r.group, "", "", "", params, r.name + "_ci_lower", format_number(r.ci->lower), "");
      row("scalar", r.group, "", "", "", params, r.name + "_ci_upper", format_number(r.ci->upper), "");
    }
  }
  return out.str();
}

inline std::string render(const ResultDocument& doc, Format format) {
  return format == Format::json ? to_json_text(doc) : to_csv_text(doc);
}

inline void write_results(const ResultDocument& doc, Format format, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write results to '" + path + "'");
  out << render(doc, format);
  if (!out) throw DataError("failed writing results to '" + path + "'");
}

inline ResultDocument read_results(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open result document '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_result_json(ss.str());
}

}  // namespace qpool

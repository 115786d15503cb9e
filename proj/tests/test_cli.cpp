#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "qpool/qpool.hpp"

using namespace qpool;

namespace {

namespace fs = std::filesystem;

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(QPOOL_CLI_PATH) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path temp_file(const std::string& name, const std::string& content) {
  const auto p = fs::temp_directory_path() / ("qpool_cli_" + name);
  std::ofstream(p) << content;
  return p;
}

const EfficiencyRecord* find(const ResultDocument& doc, const std::string& method, std::size_t K,
                             const std::string& estimator = "monte-carlo") {
  for (const auto& r : doc.efficiency) {
    if (r.method == method && r.K == K && r.estimator == estimator) return &r;
  }
  return nullptr;
}

}  // namespace

TEST(Cli, HelpListsStudyDefaults) {
  const auto eff = run("sim-efficiency --help");
  EXPECT_EQ(eff.code, 0);
  for (const std::string s : {"400", "1000", "0.25", "2:6", "300", "200", "mp,mpa,mmpa"}) {
    EXPECT_NE(eff.out.find(s), std::string::npos) << s;
  }
  const auto prev = run("sim-prevalence --help");
  EXPECT_NE(prev.out.find("300,350,400,450,500,600,700"), std::string::npos);
  const auto risk = run("sim-riskscore --help");
  EXPECT_NE(risk.out.find("0.15,0.25,0.35,0.45,0.55,0.65,0.75,0.85,1"), std::string::npos);
  EXPECT_NE(risk.out.find("3:5"), std::string::npos);
  const auto err = run("sim-error --help");
  EXPECT_NE(err.out.find("0,0.05,0.1,0.15,0.2,0.25"), std::string::npos);
  const auto ana = run("analyze --help");
  EXPECT_NE(ana.out.find("1000"), std::string::npos);
  EXPECT_NE(ana.out.find("2:10"), std::string::npos);
}

TEST(Cli, SameFlagsSameBytes) {
  const std::string args = "sim-efficiency --n 120 --replicates 4 --seed 9";
  const auto a = run(args);
  const auto b = run(args + " --threads 3");
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(run(args + " --format csv").out, run(args + " --format csv").out);
  EXPECT_NE(run("sim-efficiency --n 120 --replicates 4 --seed 10").out, a.out);
}

TEST(Cli, EfficiencyDocument) {
  const auto r = run("sim-efficiency --n 300 --replicates 20 --pool-size 2,3");
  ASSERT_EQ(r.code, 0);
  const auto doc = parse_result_json(r.out);
  EXPECT_EQ(doc.metadata.command, "sim-efficiency");
  EXPECT_FALSE(doc.metadata.timestamp.has_value());
  ASSERT_NE(find(doc, "mp", 2), nullptr);
  EXPECT_NEAR(*find(doc, "mp", 2)->phi, 0.787, 0.03);
  EXPECT_NEAR(*find(doc, "mp", 2, "analytic")->phi, 0.787297, 1e-6);
  EXPECT_NEAR(*find(doc, "mpa", 3, "analytic")->phi, 0.610370, 1e-6);
  EXPECT_NE(find(doc, "mmpa", 3), nullptr);
  EXPECT_EQ(find(doc, "mmpa", 4), nullptr);
  EXPECT_TRUE(parse_result_json(run("sim-efficiency --n 30 --replicates 2 --stamp").out).metadata.timestamp);
}

TEST(Cli, TinyPrevalenceGivesOneOverK) {
  const auto doc = parse_result_json(run("sim-efficiency --theta 1 --pool-size 4 --n 100 --replicates 3").out);
  for (const std::string m : {"mp", "mpa", "mmpa"}) EXPECT_DOUBLE_EQ(*find(doc, m, 4)->phi, 0.25) << m;
}

TEST(Cli, PrevalenceStudy) {
  const auto r = run("sim-prevalence --theta-grid 300,500 --replicates 20");
  ASSERT_EQ(r.code, 0);
  const auto doc = parse_result_json(r.out);
  double prev300 = -1, prev500 = -1;
  for (const auto& s : doc.scalars) {
    if (s.name != "prevalence") continue;
    (s.params.at("theta") == 300 ? prev300 : prev500) = s.value;
  }
  EXPECT_NEAR(prev300, std::exp(-10.0 / 3.0), 0.003);
  EXPECT_NEAR(prev500, std::exp(-2.0), 0.003);
  EXPECT_NE(find(doc, "ind", 4), nullptr);
}

TEST(Cli, RiskScoreStudy) {
  const auto doc = parse_result_json(run("sim-riskscore --lambda 0.15,1 --pool-size 3 --replicates 5").out);
  for (const auto& s : doc.scalars) {
    if (s.name != "spearman") continue;
    if (s.params.at("lambda") == 1.0) {
      EXPECT_DOUBLE_EQ(s.value, 1.0);
    }
    if (s.params.at("lambda") == 0.15) {
      EXPECT_NEAR(s.value, 0.16, 0.05);
    }
  }
}

TEST(Cli, ErrorStudyZeroSigmaIsPerfect) {
  const auto doc = parse_result_json(run("sim-error --sigma-grid 0 --n 500 --replicates 3").out);
  ASSERT_EQ(doc.accuracy.size(), 4u);
  for (const auto& a : doc.accuracy) {
    EXPECT_EQ(a.report.sens, 1.0) << a.method;
    EXPECT_EQ(a.report.spec, 1.0) << a.method;
  }
}

TEST(Cli, AnalyzeWithoutScoresFlagsMmpa) {
  const auto in = temp_file("noscore.csv", "id,v\n1,0\n2,1500\n3,200\n4,30\n5,900\n6,0\n7,2500\n8,10\n");
  const auto r = run("analyze --input " + in.string() + " --pool-size 2:3 --bootstrap 0 --replicates 10");
  ASSERT_EQ(r.code, 0);
  const auto doc = parse_result_json(r.out);
  for (std::size_t K : {2u, 3u}) {
    ASSERT_NE(find(doc, "mp", K), nullptr);
    ASSERT_NE(find(doc, "mpa", K), nullptr);
    ASSERT_NE(find(doc, "mmpa", K), nullptr);
    EXPECT_TRUE(find(doc, "mp", K)->phi.has_value());
    EXPECT_FALSE(find(doc, "mmpa", K)->phi.has_value());
    EXPECT_TRUE(find(doc, "mmpa", K)->error.has_value());
  }
  fs::remove(in);
}

TEST(Cli, AnalyzeBootstrapAndDifferences) {
  const auto cohort = temp_file("scored.csv", "");
  ASSERT_EQ(run("make-cohort --n 300 --seed 4 --output " + cohort.string()).code, 0);
  const auto r = run("analyze --input " + cohort.string() +
                     " --pool-size 3 --bootstrap 100 --bootstrap-replicates 2 --replicates 20 --oracle");
  ASSERT_EQ(r.code, 0);
  const auto doc = parse_result_json(r.out);
  for (const std::string m : {"mp", "mpa", "mmpa", "mmpa-oracle"}) {
    const auto* rec = find(doc, m, 3);
    ASSERT_NE(rec, nullptr) << m;
    ASSERT_TRUE(rec->ci.has_value()) << m;
    EXPECT_LE(rec->ci->lower, rec->ci->upper);
  }
  int diffs = 0;
  for (const auto& s : doc.scalars) diffs += s.name == "phi_difference" && s.ci ? 1 : 0;
  EXPECT_EQ(diffs, 2);
  fs::remove(cohort);
}

TEST(Cli, AtrAllZeroCohort) {
  std::string text = "id,v,s\n";
  for (int i = 0; i < 40; ++i) text += std::to_string(i) + ",0," + std::to_string(i) + "\n";
  const auto in = temp_file("zero.csv", text);
  const auto r = run("atr --input " + in.string() + " --pool-size 5 --methods mp");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "K\tATR\n5\t20.00\n");
  fs::remove(in);
}

TEST(Cli, AtrMatchesAnalyzePointEstimate) {
  const auto cohort = temp_file("atr.csv", "");
  ASSERT_EQ(run("make-cohort --n 200 --output " + cohort.string()).code, 0);
  const auto a = parse_result_json(run("analyze --input " + cohort.string() +
                                       " --pool-size 4 --bootstrap 0 --methods mpa --replicates 30")
                                       .out);
  const auto t = parse_result_json(run("atr --input " + cohort.string() +
                                       " --pool-size 4 --methods mpa --replicates 30 --format json --output /dev/stdout")
                                       .out);
  EXPECT_EQ(*find(a, "mpa", 4)->phi, *find(t, "mpa", 4)->phi);
  fs::remove(cohort);
}

TEST(Cli, MakeViralLoadCohort) {
  const auto r = run("make-cohort --kind viral-load --n 1500 --seed 2");
  ASSERT_EQ(r.code, 0);
  std::istringstream in(r.out);
  const auto c = parse_cohort(in);
  EXPECT_EQ(c.size(), 1500u);
  EXPECT_NEAR(c.prevalence(1000), 0.21, 0.03);
  EXPECT_NEAR(spearman(c.values, *c.scores), 0.27, 0.01);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("sim-efficiency --no-such-flag").code, 2);
  EXPECT_EQ(run("sim-efficiency --lambda 1.5").code, 2);
  EXPECT_EQ(run("sim-efficiency --theta -1 --n 10 --replicates 1").code, 2);
  EXPECT_EQ(run("sim-efficiency --pool-size 0").code, 2);
  EXPECT_EQ(run("sim-error --sigma-grid -0.1").code, 2);
  EXPECT_EQ(run("analyze --input /nonexistent.csv").code, 3);

  const auto bad = temp_file("bad.csv", "id,v\na,-5\n");
  EXPECT_EQ(run("analyze --input " + bad.string()).code, 3);
  const auto small = temp_file("small.csv", "id,v\na,1\nb,2\n");
  EXPECT_EQ(run("analyze --input " + small.string() + " --pool-size 3 --bootstrap 0").code, 3);
  EXPECT_EQ(run("analyze --input " + small.string() + " --pool-size 2 --bootstrap 50").code, 2);
  fs::remove(bad);
  fs::remove(small);

  EXPECT_EQ(exit_code_for(EstimationError("x")), 4);
  EXPECT_EQ(exit_code_for(DegenerateScoreError("x")), 3);
  EXPECT_EQ(exit_code_for(ConfigurationError("x")), 2);
}

TEST(Cli, OutputFileAndCsv) {
  const auto out = fs::temp_directory_path() / "qpool_cli_out.csv";
  ASSERT_EQ(run("sim-efficiency --n 30 --replicates 2 --format csv --output " + out.string()).code, 0);
  std::ifstream in(out);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, kCsvHeader);
  fs::remove(out);
}

TEST(Cli, PoolSizeParsing) {
  EXPECT_EQ(parse_pool_sizes("2:4"), (std::vector<std::size_t>{2, 3, 4}));
  EXPECT_EQ(parse_pool_sizes("2-4"), (std::vector<std::size_t>{2, 3, 4}));
  EXPECT_EQ(parse_pool_sizes("2..4"), (std::vector<std::size_t>{2, 3, 4}));
  EXPECT_EQ(parse_pool_sizes("5,3"), (std::vector<std::size_t>{5, 3}));
  EXPECT_THROW(parse_pool_sizes("4:2"), ParameterError);
  EXPECT_THROW(parse_pool_sizes("x"), ParameterError);
}

#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <iterator>
#include <regex>
#include <sstream>

#include "dbvae/datasets/io.hpp"
#include "dbvae/metrics/metrics.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace dbvae;

namespace {

struct Outcome {
  int code = 0;
  std::string output;  // stdout and stderr interleaved
};

Outcome run(const std::string& args, const fs::path& cwd, const std::string& env = "") {
  const std::string cmd = "cd '" + cwd.string() + "' && " + env + " '" DBVAE_CLI "' " + args + " 2>&1";
  Outcome o;
  FILE* pipe = popen(cmd.c_str(), "r");
  char buf[512];
  while (std::fgets(buf, sizeof buf, pipe) != nullptr) o.output += buf;
  const int status = pclose(pipe);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

std::string bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
  return out;
}

const std::regex kErrorLine(R"(error: kind=[a-z_]+ msg="[^"\n]*"\n)");

void expect_error(const Outcome& o, const std::string& kind) {
  EXPECT_NE(o.code, 0);
  EXPECT_TRUE(std::regex_match(o.output, kErrorLine)) << o.output;
  EXPECT_NE(o.output.find("kind=" + kind), std::string::npos) << o.output;
}

void make_data(const fs::path& dir) {
  ASSERT_EQ(run("gen-data --rule diag --n 600 --seed 1 --out d/train", dir).code, 0);
  ASSERT_EQ(run("gen-data --rule reverse --split test --n 200 --seed 2 --like d/train --out d/test", dir).code, 0);
  ASSERT_EQ(run("gen-data --split unbiased --n 300 --seed 3 --like d/train --out d/unbiased", dir).code, 0);
  ASSERT_EQ(run("make-feedback --data d/train --budget 120 --seed 4 --out fb", dir).code, 0);
}

}  // namespace

TEST(Cli, HelpForEverySubcommand) {
  const auto dir = test_support::scratch_dir("cli_help");
  for (const std::string sub : {"gen-data", "make-feedback", "train", "metrics", "eval-grids", "report"}) {
    const auto o = run(sub + " --help", dir);
    EXPECT_EQ(o.code, 0) << sub;
    EXPECT_NE(o.output.find("Usage"), std::string::npos) << sub;
    EXPECT_NE(o.output.find("--"), std::string::npos) << sub;
  }
  EXPECT_EQ(run("--help", dir).code, 0);
}

TEST(Cli, BadInvocationsGiveOneErrorLine) {
  const auto dir = test_support::scratch_dir("cli_errors");
  expect_error(run("", dir), "invalid_argument");
  expect_error(run("frobnicate", dir), "invalid_argument");
  expect_error(run("gen-data --n 10 --out x --colour red", dir), "invalid_argument");
  expect_error(run("gen-data --out x", dir), "invalid_argument");
  expect_error(run("gen-data --n 10 --rule sideways --out x", dir), "invalid_argument");
  expect_error(run("make-feedback --data missing --out fb", dir), "io");
  expect_error(run("train --config none.json --data d --out r", dir), "io");
  fs::create_directories(dir / "empty");
  expect_error(run("report --in empty", dir), "invalid_argument");
}

TEST(Cli, GenDataWritesReadableDatasetIdempotently) {
  const auto dir = test_support::scratch_dir("cli_gen");
  ASSERT_EQ(run("gen-data --family glyphs10 --rule diag --n 200 --seed 1 --out d/", dir).code, 0);
  const auto ds = datasets::read_dataset(dir / "d");
  EXPECT_EQ(ds.size, 200);
  ASSERT_TRUE(ds.rule.has_value());
  for (int r = 0; r < ds.size; ++r) EXPECT_EQ(ds.rule->apply(ds.factor(r, 0)), ds.factor(r, 1));

  std::map<fs::path, std::string> first;
  for (const auto& e : fs::directory_iterator(dir / "d")) first[e.path().filename()] = bytes(e.path());
  ASSERT_EQ(run("gen-data --family glyphs10 --rule diag --n 200 --seed 1 --out d/", dir).code, 0);
  for (const auto& [name, content] : first) EXPECT_EQ(bytes(dir / "d" / name), content) << name;
}

TEST(Cli, OutputRootFromEnvironment) {
  const auto dir = test_support::scratch_dir("cli_env");
  fs::create_directories(dir / "root");
  const auto o = run("gen-data --n 20 --out d", dir, "DBVAE_OUT_ROOT='" + (dir / "root").string() + "'");
  ASSERT_EQ(o.code, 0) << o.output;
  EXPECT_TRUE(fs::exists(dir / "root" / "d"));
  EXPECT_FALSE(fs::exists(dir / "d"));
}

TEST(Cli, PipelineFromDataToReport) {
  const auto dir = test_support::scratch_dir("cli_pipeline");
  make_data(dir);
  std::ofstream(dir / "proposed.json") << R"({"name": "proposed", "epochs": 1, "batch_size": 64})";
  std::ofstream(dir / "beta.json") << R"({"name": "beta1", "baseline_beta_vae": true, "epochs": 1})";

  for (const std::string seed : {"1", "2"}) {
    auto o = run("train --config proposed.json --data d/train --feedback fb --seed " + seed +
                     " --out runs/proposed_s" + seed,
                 dir);
    ASSERT_EQ(o.code, 0) << o.output;
    o = run("train --config beta.json --data d/train --seed " + seed + " --out runs/beta1_s" + seed, dir);
    ASSERT_EQ(o.code, 0) << o.output;
  }
  expect_error(run("train --config proposed.json --data d/train --out runs/x", dir), "invalid_argument");

  for (const std::string cell : {"proposed_s1", "proposed_s2", "beta1_s1", "beta1_s2"}) {
    const auto o = run("metrics --checkpoint runs/" + cell + " --data d --trials 50 --out results/" + cell +
                           "/metrics.json",
                       dir);
    ASSERT_EQ(o.code, 0) << o.output;
  }
  // Rerunning a cell replaces its row rather than appending a duplicate.
  const auto before = bytes(dir / "results/aggregate.csv");
  ASSERT_EQ(run("metrics --checkpoint runs/beta1_s2 --data d --trials 50 --out results/beta1_s2/metrics.json", dir)
                .code,
            0);
  const auto rows = lines(dir / "results/aggregate.csv");
  EXPECT_EQ(rows.size(), 5u);
  EXPECT_EQ(std::count_if(rows.begin(), rows.end(), [](const std::string& l) { return l.starts_with("beta1,"); }),
            2);
  EXPECT_EQ(before.size(), bytes(dir / "results/aggregate.csv").size());

  const auto o = run("report --in results --out report", dir);
  ASSERT_EQ(o.code, 0) << o.output;
  EXPECT_TRUE(fs::exists(dir / "report/downstream_accuracy.svg"));
  EXPECT_TRUE(fs::exists(dir / "report/violin_factorvae_score.svg"));
  EXPECT_TRUE(fs::exists(dir / "report/violin_restrictiveness_shape.svg"));

  // Report numbers are exactly the metrics.json values.
  const auto csv = lines(dir / "report/aggregate.csv");
  ASSERT_EQ(csv.size(), 5u);
  const auto header = fields(csv[0]);
  for (std::size_t r = 1; r < csv.size(); ++r) {
    const auto row = fields(csv[r]);
    std::ifstream in(dir / "results" / (row[0] + "_s" + row[2]) / "metrics.json");
    const auto flat = metrics::flatten(nlohmann::json::parse(in).get<metrics::MetricsReport>());
    ASSERT_EQ(row.size(), 4 + flat.size());
    for (std::size_t k = 0; k < flat.size(); ++k) {
      EXPECT_EQ(header[4 + k], flat[k].first);
      EXPECT_EQ(std::stod(row[4 + k]), flat[k].second) << flat[k].first;
    }
  }
  const auto svg = bytes(dir / "report/violin_factorvae_score.svg");
  const auto again = run("report --in results --out report", dir);
  ASSERT_EQ(again.code, 0);
  EXPECT_EQ(bytes(dir / "report/violin_factorvae_score.svg"), svg);
}

TEST(Cli, EvalGridsAreDeterministic) {
  const auto dir = test_support::scratch_dir("cli_grids");
  make_data(dir);
  std::ofstream(dir / "c.json") << R"({"name": "proposed", "epochs": 1, "batch_size": 64})";
  ASSERT_EQ(run("train --config c.json --data d/train --feedback fb --out run", dir).code, 0);
  ASSERT_EQ(run("eval-grids --checkpoint run --data d/unbiased --out g1", dir).code, 0);
  ASSERT_EQ(run("eval-grids --checkpoint run/checkpoint.bin --data d/unbiased --out g2", dir).code, 0);
  for (const std::string f : {"reconstruction.png", "reconstruction.json", "hybrid.png", "hybrid.json",
                              "traversal.png", "traversal.json"}) {
    ASSERT_TRUE(fs::exists(dir / "g1" / f)) << f;
    EXPECT_EQ(bytes(dir / "g1" / f), bytes(dir / "g2" / f)) << f;
  }
}

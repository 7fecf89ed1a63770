#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "consensus_labeler/raster.hpp"

namespace fs = std::filesystem;

namespace {

struct CmdResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("consensus_cli_" + std::string(info->name()) + "_" +
                                        std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CmdResult run(const std::string& args, const std::string& env = "") {
    const auto out = dir_ / "stdout.txt";
    const auto err = dir_ / "stderr.txt";
    const std::string cmd = env + (env.empty() ? "" : " ") + std::string(CLI_BINARY) + " " + args + " >" +
                            out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    CmdResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  static std::string small() { return std::string("--config ") + CONFIG_DIR + "/small.cfg"; }

  // Last line of stderr, parsed as the error record.
  static nlohmann::json error_record(const CmdResult& r) {
    auto text = r.err;
    while (!text.empty() && text.back() == '\n') text.pop_back();
    const auto pos = text.rfind('\n');
    return nlohmann::json::parse(pos == std::string::npos ? text : text.substr(pos + 1));
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, UsageErrorsExitTwo) {
  for (const std::string args : {"", "bogus", "synth --out x --no-such-flag", "agreement --out x",
                                 "eval --strategy 9 --out x"}) {
    const auto r = run(args);
    EXPECT_EQ(r.code, 2) << args;
    const auto rec = error_record(r);
    EXPECT_EQ(rec.at("error"), "usage") << args;
  }
}

TEST_F(CliTest, HelpExitsZero) { EXPECT_EQ(run("--help").code, 0); }

TEST_F(CliTest, RuntimeErrorsExitOneWithRecord) {
  auto r = run("synth " + small() + " --set world.ncols=4 --out " + (dir_ / "w").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(error_record(r).at("error"), "config");

  r = run("synth " + small() + " --set ncols=4 --out " + (dir_ / "w").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(error_record(r).at("error"), "config");
}

TEST_F(CliTest, SynthIsByteIdenticalAndEchoesConfig) {
  const auto a = dir_ / "a", b = dir_ / "b";
  ASSERT_EQ(run("synth " + small() + " --out " + a.string()).code, 0);
  ASSERT_EQ(run("synth " + small() + " --out " + b.string()).code, 0);
  for (const char* f : {"truth_class.asc", "product_1.asc", "product_5.asc", "ndvi.asc", "agreement.asc",
                        "grids.csv", "samples.jsonl", "sample_truth.csv", "effective_config.ini"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  const auto echoed = slurp(a / "effective_config.ini");
  EXPECT_NE(echoed.find("ncols=80"), std::string::npos);
  EXPECT_NE(echoed.find("seed=20220607"), std::string::npos);
}

TEST_F(CliTest, SeedPrecedence) {
  const auto flag = dir_ / "flag", env = dir_ / "env", cfg = dir_ / "cfg";
  // small.cfg sets world.seed, so the env var must not win over it.
  ASSERT_EQ(run("synth " + small() + " --out " + cfg.string(), "CONSENSUS_LABELER_SEED=5").code, 0);
  EXPECT_NE(slurp(cfg / "effective_config.ini").find("seed=20220607"), std::string::npos);
  ASSERT_EQ(run("synth " + small() + " --seed 11 --out " + flag.string(), "CONSENSUS_LABELER_SEED=5").code, 0);
  EXPECT_NE(slurp(flag / "effective_config.ini").find("seed=11"), std::string::npos);

  const auto plain = dir_ / "plain.cfg";
  std::ofstream(plain) << "[world]\nncols = 40\nnrows = 40\nbelt_row_begin = 10\nbelt_row_end = 20\n"
                          "per_stratum = 10\n";
  ASSERT_EQ(run("synth --config " + plain.string() + " --out " + env.string(), "CONSENSUS_LABELER_SEED=5").code, 0);
  EXPECT_NE(slurp(env / "effective_config.ini").find("seed=5"), std::string::npos);
  EXPECT_EQ(run("synth --config " + plain.string() + " --out " + env.string(), "CONSENSUS_LABELER_SEED=x").code, 1);
}

TEST_F(CliTest, AgreementGridsAndSample) {
  const auto w = dir_ / "w";
  ASSERT_EQ(run("synth " + small() + " --out " + w.string()).code, 0);
  std::string products;
  for (int i = 1; i <= 5; ++i) products += (w / ("product_" + std::to_string(i) + ".asc")).string() + " ";
  const auto agr = dir_ / "agr.asc";
  const auto r = run("agreement --products " + products + "--out " + agr.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(agr), slurp(w / "agreement.asc"));
  const auto summary = nlohmann::json::parse(r.out);
  EXPECT_EQ(summary.at("histogram").size(), 6u);
  EXPECT_TRUE(fs::exists(agr.string() + ".config.ini"));

  const auto grids = dir_ / "grids.csv";
  ASSERT_EQ(run("grids --agreement " + agr.string() + " --out " + grids.string()).code, 0);
  EXPECT_EQ(slurp(grids), slurp(w / "grids.csv"));

  const auto pts = dir_ / "points.csv";
  ASSERT_EQ(run("sample --ndvi " + (w / "ndvi.asc").string() + " --per-stratum 7 --seed 3 --out " + pts.string()).code, 0);
  std::istringstream lines(slurp(pts));
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "row,col,lon,lat,ndvi,stratum");
  int n = 0;
  while (std::getline(lines, line)) ++n;
  EXPECT_GT(n, 0);
  EXPECT_LE(n, 70);
}

TEST_F(CliTest, OracleLoopMatchesClosedForm) {
  const auto a = dir_ / "a", b = dir_ / "b";
  const std::string args = "loop " + small() + " --annotator oracle --error-rate 0 --out ";
  ASSERT_EQ(run(args + a.string()).code, 0);
  ASSERT_EQ(run(args + b.string()).code, 0);
  for (const char* f : {"ledger.csv", "samples.jsonl", "summary.json", "effective_config.ini"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  const auto s = nlohmann::json::parse(slurp(a / "summary.json"));
  EXPECT_TRUE(s.at("complete").get<bool>());
  EXPECT_DOUBLE_EQ(s.at("label_agreement").get<double>(), 1.0);
  const double n = s.at("n_samples");
  const double cons = s.at("n_consistent_total");
  const double incons = s.at("n_inconsistent_total");
  EXPECT_EQ(s.at("annotations_performed").get<double>(), cons + 3 * incons);
  const double strict = 1.0 - (cons + 3 * incons) / (3 * n);
  EXPECT_NEAR(s.at("saved_fraction_strict").get<double>(), strict, 1e-12);

  // Last ledger row carries the cumulative strict fraction.
  std::istringstream lines(slurp(a / "ledger.csv"));
  std::string line, last;
  while (std::getline(lines, line)) last = line;
  const auto c1 = last.rfind(',');
  const auto c2 = last.rfind(',', c1 - 1);
  EXPECT_NEAR(std::stod(last.substr(c2 + 1, c1 - c2 - 1)), strict, 1e-9);
}

TEST_F(CliTest, StrategyEvalWritesReport) {
  const auto w = dir_ / "w";
  ASSERT_EQ(run("synth " + small() + " --out " + w.string()).code, 0);
  // First certain grid from the synthesized report.
  std::istringstream lines(slurp(w / "grids.csv"));
  std::string line, grid;
  std::getline(lines, line);
  while (std::getline(lines, line)) {
    if (line.find(",certain,") != std::string::npos) {
      grid = line.substr(0, line.find(','));
      break;
    }
  }
  ASSERT_FALSE(grid.empty());
  const auto out = dir_ / "eval";
  const auto r = run("eval " + small() + " --mode strategy --strategy 4 --grid " + grid + " --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  int csvs = 0;
  for (const auto& e : fs::directory_iterator(out)) {
    if (e.path().extension() != ".csv") continue;
    ++csvs;
    const auto text = slurp(e.path());
    EXPECT_EQ(text.rfind("id,ua,pa,oa,kappa,n\n", 0), 0u);
  }
  EXPECT_EQ(csvs, 1);
  EXPECT_TRUE(fs::exists(out / "effective_config.ini"));
}

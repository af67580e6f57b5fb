#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include "helpers.hpp"

namespace fs = std::filesystem;
using testing_util::slurp;
using testing_util::TempDir;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

// Runs the CLI with stdout captured and stderr sent to a file. `env` is a
// prefix of VAR=value assignments.
RunResult run_cli(const std::string& args, const fs::path& cwd, const std::string& env = "") {
  const fs::path err_file = cwd / ".stderr";
  const std::string cmd = "cd '" + cwd.string() + "' && " + env + " '" PRIVET_CLI_PATH "' " + args +
                          " 2>'" + err_file.string() + "'";
  RunResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err_file);
  return r;
}

// Parses the one-line key=value summary.
std::map<std::string, std::string> summary(const std::string& line) {
  std::map<std::string, std::string> kv;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq != std::string::npos) kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return kv;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

std::size_t count_substr(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

class Cli : public ::testing::Test {
 protected:
  // one 900-row null population split into train/test/synth, shared by all cases
  static void SetUpTestSuite() {
    data_ = new TempDir();
    const RunResult g = run_cli(
        "generate --rows 900 --cols 1024 --split-sizes 300,300,300 --seed 3 --out gen", data_->path());
    ASSERT_EQ(g.code, 0) << g.err;
    const fs::path gen = data_->path() / "gen";
    std::ofstream src(data_->path() / "source.csv"), ref(data_->path() / "reference.csv"),
        lab(data_->path() / "labels.csv");
    for (const char* part : {"train.csv", "test.csv", "synth.csv"}) src << slurp(gen / part);
    ref << slurp(gen / "train.csv") << slurp(gen / "test.csv");
    for (int i = 0; i < 600; ++i) lab << (i < 300 ? 1 : 0) << '\n';
  }
  static void TearDownTestSuite() {
    delete data_;
    data_ = nullptr;
  }

  static fs::path in(const std::string& name) { return data_->path() / name; }
  static std::string triple() {
    return "--train '" + in("gen/train.csv").string() + "' --test '" + in("gen/test.csv").string() +
           "' --synth '" + in("gen/synth.csv").string() + "'";
  }

  static TempDir* data_;
  TempDir work_;
};

TempDir* Cli::data_ = nullptr;

}  // namespace

TEST_F(Cli, ScoreNullFixture) {
  const RunResult r = run_cli("score " + triple() + " --out s", work_.path());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto kv = summary(r.out);
  EXPECT_EQ(kv.at("command"), "score");
  EXPECT_EQ(kv.at("n_synth"), "300");
  EXPECT_LE(std::stod(kv.at("npl")), 0.01 * 300);
  for (const char* f : {"config.ini", "ecdf.csv", "ecdf.svg", "samples.csv", "summary.json"})
    EXPECT_TRUE(fs::exists(work_ / ("s/" + std::string(f)))) << f;
}

TEST_F(Cli, MissingFileNamesPath) {
  const RunResult r = run_cli("score --train nope.csv --test '" + in("gen/test.csv").string() +
                                  "' --synth '" + in("gen/synth.csv").string() + "' --out s",
                              work_.path());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nope.csv"), std::string::npos) << r.err;
}

TEST_F(Cli, MissingRequiredFlagIsValidationError) {
  const RunResult r = run_cli("score --synth x.csv --out s", work_.path());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--train"), std::string::npos) << r.err;
}

TEST_F(Cli, TestRequiredUnlessNoTest) {
  const RunResult r = run_cli("score --train '" + in("gen/train.csv").string() + "' --synth '" +
                                  in("gen/synth.csv").string() + "' --out s",
                              work_.path());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--no-test"), std::string::npos) << r.err;
}

TEST_F(Cli, NoTestPrintsBanner) {
  const RunResult r = run_cli("score --train '" + in("gen/train.csv").string() + "' --synth '" +
                                  in("gen/synth.csv").string() + "' --no-test --out s",
                              work_.path());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("no privacy score"), std::string::npos) << r.err;
  EXPECT_EQ(summary(r.out).at("npl"), "undefined");
  EXPECT_NE(slurp(work_ / "s/summary.json").find("no privacy score"), std::string::npos);
}

TEST_F(Cli, UnknownFlagIsError) {
  const RunResult r = run_cli("score " + triple() + " --out s --bogus-flag 1", work_.path());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--bogus-flag"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(work_ / "s/summary.json"));
}

TEST_F(Cli, DegenerateWindowIsValidationError) {
  std::ofstream dup(work_ / "dup.csv");
  for (int i = 0; i < 100; ++i) dup << "0,1,0,1\n";
  dup.close();
  const RunResult r = run_cli("fit --reference dup.csv --out f", work_.path());
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(r.err.empty());
}

TEST_F(Cli, EcdfHasThreeCurvesAndFit) {
  const RunResult r = run_cli("ecdf " + triple() + " --out e", work_.path());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(summary(r.out).at("curves"), "3");
  std::map<std::string, std::size_t> per_curve;
  const auto rows = read_csv(work_ / "e/ecdf.csv");
  ASSERT_GT(rows.size(), 1u);
  for (std::size_t i = 1; i < rows.size(); ++i) ++per_curve[rows[i].at(0)];
  EXPECT_EQ(per_curve.size(), 4u);
  EXPECT_EQ(per_curve.count("fit"), 1u);
  EXPECT_EQ(per_curve["train_train"], 300u);
  EXPECT_EQ(per_curve["synth_train"], 300u);
  EXPECT_EQ(per_curve["synth_test"], 300u);
  const std::string svg = slurp(work_ / "e/ecdf.svg");
  EXPECT_EQ(count_substr(svg, "<polyline") + count_substr(svg, "<path"), 4u);
}

TEST_F(Cli, GridTwoByTwoMap) {
  const RunResult r = run_cli("grid --source '" + in("source.csv").string() +
                                  "' --f-fake 0.1,0.3 --f-copy 0.1,0.3 --seed 5 --out g",
                              work_.path());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(summary(r.out).at("cells"), "4");
  EXPECT_EQ(summary(r.out).at("errors"), "0");
  const auto npl = read_csv(work_ / "g/privet_npl.csv");
  ASSERT_EQ(npl.size(), 5u);
  EXPECT_EQ(npl[0], (std::vector<std::string>{"f_fake", "f_copy", "metric", "value"}));
  EXPECT_TRUE(fs::exists(work_ / "g/map.csv"));
  EXPECT_TRUE(fs::exists(work_ / "g/privet_npl.svg"));
}

TEST_F(Cli, AttackRecallNondecreasing) {
  const RunResult r = run_cli("attack --reference '" + in("reference.csv").string() + "' --synth '" +
                                  in("gen/synth.csv").string() + "' --labels '" +
                                  in("labels.csv").string() + "' --out a",
                              work_.path());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = read_csv(work_ / "a/pr.csv");
  ASSERT_GT(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"threshold", "precision", "recall"}));
  for (std::size_t i = 2; i < rows.size(); ++i) {
    EXPECT_GE(std::stod(rows[i][0]), std::stod(rows[i - 1][0]));
    EXPECT_GE(std::stod(rows[i][2]), std::stod(rows[i - 1][2]));
  }
  EXPECT_DOUBLE_EQ(std::stod(rows.back()[2]), 1.0);
}

TEST_F(Cli, ConfigEchoRerunsIdentically) {
  const RunResult a = run_cli("score " + triple() + " --decimate --tau -2.5 --seed 9 --out s1",
                              work_.path());
  ASSERT_EQ(a.code, 0) << a.err;
  const RunResult b = run_cli("score --config s1/config.ini --out s2", work_.path());
  ASSERT_EQ(b.code, 0) << b.err;
  for (const char* f : {"samples.csv", "summary.json", "config.ini", "ecdf.csv"})
    EXPECT_EQ(slurp(work_ / ("s1/" + std::string(f))), slurp(work_ / ("s2/" + std::string(f)))) << f;
}

TEST_F(Cli, FlagOverridesConfigFile) {
  testing_util::write_file(work_ / "c.ini", "tau = -100\n");
  const RunResult r = run_cli("score --config c.ini " + triple() + " --tau -1 --out s", work_.path());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(slurp(work_ / "s/config.ini").find("tau = -1\n"), std::string::npos);
}

TEST_F(Cli, DeterministicGivenSeed) {
  const std::string gen = "generate --rows 200 --cols 256 --split-sizes 100,50,50 --seed 11 --out ";
  ASSERT_EQ(run_cli(gen + "g1", work_.path()).code, 0);
  ASSERT_EQ(run_cli(gen + "g2", work_.path()).code, 0);
  for (const char* f : {"train.csv", "test.csv", "synth.csv"})
    EXPECT_EQ(slurp(work_ / ("g1/" + std::string(f))), slurp(work_ / ("g2/" + std::string(f))));

  const std::string gof = "gof --reference '" + in("gen/train.csv").string() +
                          "' --n-bootstrap 20 --seed 4 --out ";
  ASSERT_EQ(run_cli(gof + "o1", work_.path()).code, 0);
  ASSERT_EQ(run_cli(gof + "o2", work_.path()).code, 0);
  EXPECT_EQ(slurp(work_ / "o1/gof.json"), slurp(work_ / "o2/gof.json"));
  EXPECT_EQ(slurp(work_ / "o1/pp.csv"), slurp(work_ / "o2/pp.csv"));

  const std::string leak = "leakgen --train '" + in("gen/train.csv").string() + "' --synth '" +
                           in("gen/synth.csv").string() + "' --f-fake 0.2 --f-copy 0.3 --seed 6 --out ";
  ASSERT_EQ(run_cli(leak + "l1", work_.path()).code, 0);
  ASSERT_EQ(run_cli(leak + "l2", work_.path()).code, 0);
  for (const auto& e : fs::directory_iterator(work_ / "l1"))
    EXPECT_EQ(slurp(e.path()), slurp(work_ / "l2" / e.path().filename())) << e.path();
}

TEST_F(Cli, OutDirFromEnvironment) {
  const RunResult r =
      run_cli("fit --reference '" + in("gen/train.csv").string() + "'", work_.path(), "PRIVET_OUT_DIR=envout");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(work_ / "envout/fit.json"));
}

TEST_F(Cli, HelpListsEveryFlag) {
  const std::map<std::string, std::vector<std::string>> flags = {
      {"score", {"--train", "--test", "--synth", "--no-test", "--metric", "--a-frac", "--q-frac",
                 "--family", "--likelihood", "--tau", "--flag-score", "--tau-delta-p", "--decimate",
                 "--no-rescale", "--regime-tolerance", "--seed", "--threads", "--out", "--format",
                 "--values", "--config"}},
      {"ecdf", {"--train", "--test", "--synth", "--tau", "--no-rescale", "--config"}},
      {"fit", {"--reference", "--query", "--family", "--likelihood", "--config"}},
      {"gof", {"--reference", "--n-bootstrap", "--n-q", "--q-min", "--q-max", "--splits", "--config"}},
      {"attack", {"--reference", "--synth", "--labels", "--memorized-fraction", "--config"}},
      {"leakgen", {"--train", "--synth", "--f-fake", "--f-copy", "--config"}},
      {"generate", {"--rows", "--cols", "--block", "--founders", "--mutation", "--mutation-max",
                    "--split-sizes", "--config"}},
      {"grid", {"--source", "--f-fake", "--f-copy", "--split-sizes", "--decimate", "--baselines",
                "--external", "--external-threshold", "--config"}},
      {"baseline", {"--train", "--test", "--synth", "--name", "--subsample", "--config"}},
  };
  for (const auto& [cmd, list] : flags) {
    const RunResult r = run_cli(cmd + " --help", work_.path());
    EXPECT_EQ(r.code, 0) << cmd;
    for (const auto& f : list) EXPECT_NE(r.out.find(f), std::string::npos) << cmd << " " << f;
  }
}

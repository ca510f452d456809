#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "wrcp/datagen.hpp"

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "wrcp_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args) {
  std::string cmd = std::string(WRCP_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kSmallGen =
    "--n-per-source 40 --n-cal 45 --n-test-sets 3 --m-per-test 30 --n-pool 20 --seed 5";

} // namespace

TEST(Cli, ExitCodes) {
  auto dir = scratch("codes");
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("gen --k 1 --out " + (dir / "b").string()), 1);
  EXPECT_EQ(run("gen --k 3"), 1);
  EXPECT_EQ(run("gen --k abc --out " + (dir / "b").string()), 1);
  EXPECT_EQ(run("train --bundle " + (dir / "missing").string() + " --out " + (dir / "m").string()), 2);
  EXPECT_EQ(run("bounds --L 1 --W 0.0025 --out " + (dir / "calc").string()), 0);
  EXPECT_EQ(run("bounds --L -1 --W 0.0025 --out " + (dir / "calc2").string()), 1);
}

TEST(Cli, ConfigPrecedence) {
  auto dir = scratch("config");
  {
    std::ofstream cfg(dir / "run.cfg");
    cfg << "k=4\nr-cov=2.5\n";
  }
  ASSERT_EQ(run("gen " + kSmallGen + " --config " + (dir / "run.cfg").string() + " --out " + (dir / "a").string()), 0);
  auto a = wrcp::read_bundle(dir / "a");
  EXPECT_EQ(a.k(), 4u);
  EXPECT_EQ(a.task->knobs.r_cov, 2.5);

  ASSERT_EQ(run("gen " + kSmallGen + " --k 2 --config " + (dir / "run.cfg").string() + " --out " + (dir / "b").string()),
            0);
  auto b = wrcp::read_bundle(dir / "b");
  EXPECT_EQ(b.k(), 2u);
  EXPECT_EQ(b.task->knobs.r_cov, 2.5);

  {
    std::ofstream cfg(dir / "bad.cfg");
    cfg << "colour=blue\n";
  }
  EXPECT_EQ(run("gen --config " + (dir / "bad.cfg").string() + " --out " + (dir / "c").string()), 1);
}

TEST(Cli, PipelineRerunsAreByteIdentical) {
  auto dir = scratch("pipeline");
  for (std::string tag : {"one", "two"}) {
    auto root = dir / tag;
    ASSERT_EQ(run("gen " + kSmallGen + " --out " + (root / "bundle").string()), 0);
    ASSERT_EQ(run("train --bundle " + (root / "bundle").string() + " --variant erm --epochs 5 --seed 2 --out " +
                  (root / "erm").string()),
              0);
    ASSERT_EQ(run("train --bundle " + (root / "bundle").string() + " --variant wrcp --beta 1 --epochs 5 --seed 2 --out " +
                  (root / "wr").string()),
              0);
    ASSERT_EQ(run("eval --bundle " + (root / "bundle").string() + " --checkpoint " + (root / "erm" / "model.ckpt").string() +
                  " --wrcp-checkpoint " + (root / "wr" / "model.ckpt").string() +
                  " --methods cp,iwcp,wccp,wrcp --alphas 0.1,0.5 --seed 3 --out " + (root / "eval").string()),
              0);
  }
  for (const char* f : {"bundle/calibration.csv", "bundle/tests/test_2.csv", "erm/model.ckpt", "wr/model.ckpt",
                        "wr/metrics.csv", "eval/eval.csv", "eval/summary.csv"}) {
    std::string a = slurp(dir / "one" / f);
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, slurp(dir / "two" / f)) << f;
  }
  std::string eval = slurp(dir / "one" / "eval" / "eval.csv");
  EXPECT_EQ(eval.substr(0, eval.find('\n')), "trial,test_set,method,alpha,coverage,gap,avg_size,tau,cal_gap");
}

TEST(Cli, WrcpEvalNeedsMatchingModel) {
  auto dir = scratch("mismatch");
  ASSERT_EQ(run("gen " + kSmallGen + " --out " + (dir / "bundle").string()), 0);
  ASSERT_EQ(run("train --bundle " + (dir / "bundle").string() + " --variant erm --epochs 2 --out " +
                (dir / "erm").string()),
            0);
  EXPECT_EQ(run("eval --bundle " + (dir / "bundle").string() + " --checkpoint " + (dir / "erm" / "model.ckpt").string() +
                " --methods wrcp --out " + (dir / "eval").string()),
            1);
}

TEST(Cli, BoundsCalculatorOutput) {
  auto dir = scratch("bounds");
  ASSERT_EQ(run("bounds --L 2 --W 0.0384 --out " + dir.string()), 0);
  std::string csv = slurp(dir / "bounds.csv");
  EXPECT_NE(csv.find("wasserstein_bound,0.391918359"), std::string::npos) << csv;
}

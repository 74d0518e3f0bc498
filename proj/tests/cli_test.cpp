#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result cli(const std::string& args) {
  static int counter = 0;
  const fs::path log = fs::temp_directory_path() / ("wmg_cli_out_" + std::to_string(++counter));
  const std::string cmd = std::string(WMG_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  fs::remove(log);
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const std::string kConfigDir = WMG_CONFIG_DIR;

}  // namespace

TEST(CliTests, ZeroStepTrainWritesHeaderAndCheckpoint) {
  const fs::path out = scratch("wmg_cli_zero");
  const Result r = cli("train -c " + kConfigDir + "/wmg_20m.cfg --total-steps 0 -o " + out.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(slurp(out / "metrics.csv"),
            "env_steps,quiz_reward_pct,policy_loss,value_loss,entropy,lr,wall_secs\n");
  for (const char* f : {"manifest.txt", "tensors.bin", "config.cfg", "trainer_state.txt"})
    EXPECT_TRUE(fs::exists(out / "checkpoint" / f)) << f;
  EXPECT_NE(r.out.find("params=123163"), std::string::npos) << r.out;
  fs::remove_all(out);
}

TEST(CliTests, UsageAndConfigErrorsExitOne) {
  EXPECT_EQ(cli("").code, 1);
  EXPECT_EQ(cli("train --bogus").code, 1);
  const fs::path dir = scratch("wmg_cli_badcfg");
  std::ofstream(dir / "bad.cfg") << "Model = wmg\nNot a key = 3\n";
  const Result r = cli("train -c " + (dir / "bad.cfg").string() + " -o " + (dir / "o").string());
  EXPECT_EQ(r.code, 1) << r.out;
  EXPECT_NE(r.out.find("Not a key"), std::string::npos) << r.out;
  EXPECT_EQ(cli("oracle --depth 2 --steps 5").code, 1);
  fs::remove_all(dir);
}

TEST(CliTests, ShortTrainingRunIsReproducibleAndResumes) {
  const fs::path a = scratch("wmg_cli_run_a"), b = scratch("wmg_cli_run_b");
  const std::string common = " -c " + kConfigDir +
                             "/wmg_20m.cfg -s 'Pattern size=3' -s 'Max graph size=4' -s 'WMG layers=1' "
                             "-s 'Metrics interval=600' -s 'Checkpoint interval=600' --no-wall-time";
  ASSERT_EQ(cli("train" + common + " --total-steps 1800 -o " + a.string()).code, 0);
  ASSERT_EQ(cli("train" + common + " --total-steps 1200 -o " + b.string()).code, 0);
  const Result resumed = cli("train" + common + " --total-steps 1800 --resume " + b.string() + " -o " + b.string());
  ASSERT_EQ(resumed.code, 0) << resumed.out;
  EXPECT_EQ(slurp(a / "metrics.csv"), slurp(b / "metrics.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(CliTests, OracleReportsPerfectDepthSix) {
  const Result r = cli("oracle --depth 6 --episodes 2000");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("reward_pct=100"), std::string::npos) << r.out;
}

TEST(CliTests, EvalIsDeterministic) {
  const fs::path dir = scratch("wmg_cli_eval");
  ASSERT_EQ(cli("gen-scripts --count 50 --steps 12 -o " + (dir / "s.txt").string()).code, 0);
  ASSERT_EQ(cli("train -c " + kConfigDir + "/wmg_20m.cfg -s 'WMG layers=1' --total-steps 0 -o " +
                (dir / "run").string())
                .code,
            0);
  const std::string args =
      "eval --checkpoint " + (dir / "run/checkpoint").string() + " --scripts " + (dir / "s.txt").string();
  const Result x = cli(args), y = cli(args);
  ASSERT_EQ(x.code, 0) << x.out;
  EXPECT_EQ(x.out, y.out);
  EXPECT_NE(x.out.find("episodes=50 quiz_steps=300"), std::string::npos) << x.out;
  fs::remove_all(dir);
}

TEST(CliTests, TuneReportOnEmptyStoreExitsThree) {
  const fs::path dir = scratch("wmg_cli_tune_empty");
  std::ofstream(dir / "grid.txt") << "Learning rate & 1e-4, 2e-4 \\\\\n";
  const Result r = cli("tune-report --grid " + (dir / "grid.txt").string() + " --store " + (dir / "store").string());
  EXPECT_EQ(r.code, 3) << r.out;
  fs::remove_all(dir);
}

TEST(CliTests, SyntheticTuningFindsOptimum) {
  const fs::path dir = scratch("wmg_cli_tune");
  std::ofstream(dir / "grid.txt") << "p & 0, 1, 2, 3, 4, 5 \\\\\nq & a, b, c \\\\\n";
  const std::string base = " --grid " + (dir / "grid.txt").string() + " --store " + (dir / "store").string();
  for (int w = 0; w < 2; ++w)
    ASSERT_EQ(cli("tune-worker --objective synthetic --runs 40 --worker-id w" + std::to_string(w) +
                  " --seed " + std::to_string(w) + base)
                  .code,
              0);
  const Result r = cli("tune-report" + base);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("runs=80"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("p = 4"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("q = c"), std::string::npos) << r.out;
  fs::remove_all(dir);
}

TEST(CliTests, TuneWorkerRejectsUnknownGridKeysBeforeRunning) {
  const fs::path dir = scratch("wmg_cli_tune_badkey");
  std::ofstream(dir / "grid.txt") << "Not a key & 1, 2 \\\\\n";
  const Result r = cli("tune-worker --objective train --grid " + (dir / "grid.txt").string() + " --store " +
                       (dir / "store").string());
  EXPECT_EQ(r.code, 1) << r.out;
  EXPECT_FALSE(fs::exists(dir / "store") && !fs::is_empty(dir / "store"));
  fs::remove_all(dir);
}

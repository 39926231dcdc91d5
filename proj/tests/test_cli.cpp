#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

// End-to-end tests that drive the installed binary the way a user would:
// every command runs through /bin/sh via std::system.

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(fs::temp_directory_path() /
                        ("puflock_cli_" + std::to_string(::getpid())));
    fs::create_directories(*dir_);
    // Small four-class dataset and model shared by every test.
    ASSERT_EQ(run("gen-data --images " + path("train.images") + " --labels " +
                  path("train.labels") +
                  " --classes 4 --dim 8 --per-class 30 --seed 21")
                  .exit_code,
              0);
    // IDX quantization rescales features into [0, 1], so the schedule runs
    // longer and hotter than it would on raw blob coordinates.
    ASSERT_EQ(run("train --images " + path("train.images") + " --labels " +
                  path("train.labels") + " --out " + path("model.nnbm") +
                  " --hidden 12 --epochs 40 --batch 16 --lr 0.2 --seed 5")
                  .exit_code,
              0);
  }

  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete dir_;
    dir_ = nullptr;
  }

  static std::string path(const std::string& name) {
    return (*dir_ / name).string();
  }

  // Runs `puflock <args>` with a clean seed environment unless the caller
  // prefixes its own `env` overrides via the `environment` argument.
  static RunResult run(const std::string& args,
                       const std::string& environment = "env -u PUFLOCK_MACHINE_SEED") {
    const std::string out_file = path("last_stdout");
    const std::string err_file = path("last_stderr");
    const std::string cmd = environment + " " + std::string(PUFLOCK_CLI_PATH) +
                            " " + args + " > " + out_file + " 2> " + err_file;
    const int status = std::system(cmd.c_str());
    RunResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = slurp(out_file);
    result.err = slurp(err_file);
    return result;
  }

  static std::string data_args() {
    return " --images " + path("train.images") + " --labels " +
           path("train.labels");
  }

  // encrypt once with a fixed machine seed; reused by several tests.
  static nlohmann::json encrypt_default() {
    const RunResult r = run(
        "encrypt --model " + path("model.nnbm") + " --out " +
        path("enc.nnbm") + " --helper " + path("enc.nnhd") + data_args() +
        " --layer 0 --pct 40 --seed 3 --machine-seed 42 --json");
    EXPECT_EQ(r.exit_code, 0) << r.err;
    return nlohmann::json::parse(r.out);
  }

  static fs::path* dir_;
};

fs::path* CliTest::dir_ = nullptr;

TEST_F(CliTest, TrainReportsHighAccuracyOnBlobs) {
  const RunResult r =
      run("train" + data_args() + " --out " + path("model2.nnbm") +
          " --hidden 12 --epochs 40 --batch 16 --lr 0.2 --seed 5 --json");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto report = nlohmann::json::parse(r.out);
  EXPECT_GE(report["accuracy"].get<double>(), 0.9);
  EXPECT_TRUE(fs::exists(path("model2.nnbm")));
  // Same seed, same data: the two training runs must agree bit for bit.
  EXPECT_EQ(slurp(path("model.nnbm")), slurp(path("model2.nnbm")));
}

TEST_F(CliTest, EncryptDegradesAndRunWithSeedRestores) {
  const auto enc = encrypt_default();
  const double before = enc["accuracy_before"].get<double>();
  const double after = enc["accuracy_after"].get<double>();
  EXPECT_GE(before, 0.9);
  EXPECT_LT(after, before - 0.3);
  EXPECT_GT(enc["encrypted_weights"].get<int>(), 0);

  // Decrypting on the bound machine restores the exact accuracy.
  const RunResult good =
      run("run --model " + path("enc.nnbm") + " --helper " + path("enc.nnhd") +
          data_args() + " --machine-seed 42 --json");
  ASSERT_EQ(good.exit_code, 0) << good.err;
  EXPECT_EQ(nlohmann::json::parse(good.out)["accuracy"].get<double>(), before);

  // A clone (different machine seed) derives wrong keys and stays degraded.
  const RunResult clone =
      run("run --model " + path("enc.nnbm") + " --helper " + path("enc.nnhd") +
          data_args() + " --machine-seed 43 --json");
  ASSERT_EQ(clone.exit_code, 0) << clone.err;
  EXPECT_LT(nlohmann::json::parse(clone.out)["accuracy"].get<double>(),
            before - 0.3);
}

TEST_F(CliTest, RunWithoutHelperNeedsNoSeed) {
  const RunResult r =
      run("run --model " + path("model.nnbm") + data_args() + " --json");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_GE(nlohmann::json::parse(r.out)["accuracy"].get<double>(), 0.9);
}

TEST_F(CliTest, MissingMachineSeedExitsFive) {
  encrypt_default();
  EXPECT_EQ(run("run --model " + path("enc.nnbm") + " --helper " +
                path("enc.nnhd") + data_args())
                .exit_code,
            5);
  EXPECT_EQ(run("encrypt --model " + path("model.nnbm") + " --out " +
                path("enc5.nnbm") + " --helper " + path("enc5.nnhd") +
                data_args() + " --pct 10")
                .exit_code,
            5);
}

TEST_F(CliTest, SeedEnvironmentVariableWorksAndFlagWins) {
  const auto enc = encrypt_default();
  const double before = enc["accuracy_before"].get<double>();

  const std::string run_args = "run --model " + path("enc.nnbm") +
                               " --helper " + path("enc.nnhd") + data_args() +
                               " --json";
  const RunResult via_env = run(run_args, "env PUFLOCK_MACHINE_SEED=42");
  ASSERT_EQ(via_env.exit_code, 0) << via_env.err;
  EXPECT_EQ(nlohmann::json::parse(via_env.out)["accuracy"].get<double>(),
            before);

  // The flag overrides a conflicting environment value.
  const RunResult flag_wins =
      run(run_args + " --machine-seed 42", "env PUFLOCK_MACHINE_SEED=99");
  ASSERT_EQ(flag_wins.exit_code, 0) << flag_wins.err;
  EXPECT_EQ(nlohmann::json::parse(flag_wins.out)["accuracy"].get<double>(),
            before);

  const RunResult bad_env = run(run_args, "env PUFLOCK_MACHINE_SEED=notanum");
  EXPECT_EQ(bad_env.exit_code, 2);
}

TEST_F(CliTest, DecryptEmitPlaintextWritesUnboundModel) {
  const auto enc = encrypt_default();
  const double before = enc["accuracy_before"].get<double>();

  // Default decrypt reports accuracy without persisting plaintext weights.
  const RunResult check =
      run("decrypt --model " + path("enc.nnbm") + " --helper " +
          path("enc.nnhd") + data_args() + " --machine-seed 42 --json");
  ASSERT_EQ(check.exit_code, 0) << check.err;
  EXPECT_EQ(nlohmann::json::parse(check.out)["accuracy"].get<double>(),
            before);
  EXPECT_FALSE(fs::exists(path("plain.nnbm")));

  const RunResult emit =
      run("decrypt --model " + path("enc.nnbm") + " --helper " +
          path("enc.nnhd") + data_args() +
          " --machine-seed 42 --emit-plaintext --out " + path("plain.nnbm"));
  ASSERT_EQ(emit.exit_code, 0) << emit.err;
  EXPECT_NE(emit.err.find("hardware binding"), std::string::npos);
  ASSERT_TRUE(fs::exists(path("plain.nnbm")));
  EXPECT_EQ(slurp(path("plain.nnbm")), slurp(path("model.nnbm")));

  // --emit-plaintext without a destination is a usage error.
  EXPECT_EQ(run("decrypt --model " + path("enc.nnbm") + " --helper " +
                path("enc.nnhd") + data_args() +
                " --machine-seed 42 --emit-plaintext")
                .exit_code,
            2);
}

TEST_F(CliTest, RebindMovesTheBindingToTheNewMachine) {
  const auto enc = encrypt_default();
  const double before = enc["accuracy_before"].get<double>();

  const RunResult rebind = run(
      "rebind --model " + path("enc.nnbm") + " --helper " + path("enc.nnhd") +
      " --out " + path("moved.nnbm") + " --helper-out " + path("moved.nnhd") +
      " --old-seed 42 --new-seed 77 --seed 4");
  ASSERT_EQ(rebind.exit_code, 0) << rebind.err;

  const std::string moved_args = "run --model " + path("moved.nnbm") +
                                 " --helper " + path("moved.nnhd") +
                                 data_args() + " --json";
  const RunResult on_new = run(moved_args + " --machine-seed 77");
  ASSERT_EQ(on_new.exit_code, 0) << on_new.err;
  EXPECT_EQ(nlohmann::json::parse(on_new.out)["accuracy"].get<double>(),
            before);

  const RunResult on_old = run(moved_args + " --machine-seed 42");
  ASSERT_EQ(on_old.exit_code, 0) << on_old.err;
  EXPECT_LT(nlohmann::json::parse(on_old.out)["accuracy"].get<double>(),
            before - 0.3);

  EXPECT_EQ(run("rebind --model " + path("enc.nnbm") + " --helper " +
                path("enc.nnhd") + " --out " + path("x.nnbm") +
                " --helper-out " + path("x.nnhd") + " --old-seed 42")
                .exit_code,
            5);
}

TEST_F(CliTest, SweepWritesDeterministicCsvAndJson) {
  const std::string args = "sweep --model " + path("model.nnbm") +
                           data_args() +
                           " --pcts 0,20,40 --trials 2 --master-seed 1 "
                           "--machine-seed 42 --csv " +
                           path("sweep.csv") + " --json " + path("sweep.json");
  ASSERT_EQ(run(args).exit_code, 0);
  const std::string csv = slurp(path("sweep.csv"));
  EXPECT_EQ(csv.rfind("pct,trial,accuracy,stddev\n", 0), 0u);
  const auto report = nlohmann::json::parse(slurp(path("sweep.json")));
  EXPECT_EQ(report["rows"].size(), 6u);
  EXPECT_EQ(report["summaries"].size(), 3u);
  EXPECT_EQ(report["mode"], "nested");

  // Byte-identical on a second run.
  ASSERT_EQ(run("sweep --model " + path("model.nnbm") + data_args() +
                " --pcts 0,20,40 --trials 2 --master-seed 1 --machine-seed 42"
                " --csv " +
                path("sweep2.csv"))
                .exit_code,
            0);
  EXPECT_EQ(slurp(path("sweep2.csv")), csv);

  ASSERT_EQ(run("sweep --model " + path("model.nnbm") + data_args() +
                " --pcts 0,20 --trials 1 --machine-seed 42 --mode independent "
                "--json " +
                path("sweep_ind.json"))
                .exit_code,
            0);
  EXPECT_EQ(nlohmann::json::parse(slurp(path("sweep_ind.json")))["mode"],
            "independent");
}

TEST_F(CliTest, CloneEvalWritesReport) {
  const RunResult r = run("clone-eval --model " + path("model.nnbm") +
                          data_args() +
                          " --target-seed 42 --clone-seeds 43,44 --pcts 0,40 "
                          "--master-seed 1 --json " +
                          path("clone.json"));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto report = nlohmann::json::parse(slurp(path("clone.json")));
  EXPECT_EQ(report["target_seed"].get<std::uint64_t>(), 42u);
  ASSERT_EQ(report["rows"].size(), 2u);
  EXPECT_EQ(report["rows"][0]["clones"].size(), 2u);
  EXPECT_EQ(report["rows"][0]["no_decrypt"].get<double>(),
            report["original_accuracy"].get<double>());
}

TEST_F(CliTest, PufStatsReportsBalanceAndUniqueness) {
  const RunResult r =
      run("puf-stats --machine-seed 1 --other-seed 2 --challenges 2000 --json");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto stats = nlohmann::json::parse(r.out);
  EXPECT_GE(stats["balance"].get<double>(), 0.4);
  EXPECT_LE(stats["balance"].get<double>(), 0.6);
  EXPECT_GE(stats["uniqueness"].get<double>(), 0.4);
  EXPECT_LE(stats["uniqueness"].get<double>(), 0.6);
}

TEST_F(CliTest, CorruptModelFileExitsThree) {
  std::ofstream(path("garbage.nnbm"), std::ios::binary) << "NOPE not a model";
  EXPECT_EQ(
      run("run --model " + path("garbage.nnbm") + data_args()).exit_code, 3);
}

TEST_F(CliTest, DimensionMismatchExitsFour) {
  ASSERT_EQ(run("gen-data --images " + path("narrow.images") + " --labels " +
                path("narrow.labels") +
                " --classes 4 --dim 5 --per-class 10 --seed 2")
                .exit_code,
            0);
  EXPECT_EQ(run("run --model " + path("model.nnbm") + " --images " +
                path("narrow.images") + " --labels " + path("narrow.labels"))
                .exit_code,
            4);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run("run --model " + path("model.nnbm") + data_args() +
                " --no-such-flag")
                .exit_code,
            2);
  EXPECT_EQ(run("").exit_code, 2);          // missing subcommand
  EXPECT_EQ(run("frobnicate").exit_code, 2);
  EXPECT_EQ(run("--help").exit_code, 0);
}

TEST_F(CliTest, HumanReadableOutputUsesFourDecimals) {
  const RunResult r = run("run --model " + path("model.nnbm") + data_args());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find("Accuracy = 0."), std::string::npos) << r.out;
}

}  // namespace

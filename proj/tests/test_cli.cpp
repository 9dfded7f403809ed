#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "cli.hpp"

using namespace supplyrl;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("supplyrl_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) { return io::read_file(p); }

const std::vector<std::string> kFast = {"--hp", "n_steps=64", "--hp", "minibatch_size=32", "--hp", "epochs=1",
                                        "--arch", "trunk=[16]", "--quiet"};

std::vector<std::string> with_fast(std::vector<std::string> args, std::vector<std::string> extra = {}) {
  args.insert(args.end(), kFast.begin(), kFast.end());
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

// The recurrent learner trains on whole windows.
const std::vector<std::string> kRecurrentWindow = {"--hp", "minibatch_size=64"};

}  // namespace

TEST(Cli, HelpSucceeds) {
  const auto r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("train"), std::string::npos);
}

TEST(Cli, MissingRequiredOptionIsUsageError) {
  const auto dir = scratch("missing");
  EXPECT_EQ(run({"train", "--seeds", "1", "--out", dir.string()}).code, 2);
  EXPECT_EQ(run({"train", "--task", "Sto0", "--out", dir.string()}).code, 2);
  EXPECT_EQ(run({}).code, 2);
}

TEST(Cli, InvalidValuesAreConfigErrors) {
  const auto dir = scratch("invalid");
  const auto base = std::vector<std::string>{"train", "--task", "Sto0", "--seeds", "1", "--out", dir.string(), "--steps", "64"};
  auto with = [&](std::vector<std::string> extra) {
    auto a = base;
    a.insert(a.end(), extra.begin(), extra.end());
    return run(a);
  };
  EXPECT_EQ(with({"--hp", "learning_rate=-1"}).code, 2);
  EXPECT_EQ(with({"--hp", "no_such_key=1"}).code, 2);
  EXPECT_EQ(with({"--hp", "n_steps=abc"}).code, 2);
  EXPECT_EQ(with({"--env", "max_days=0"}).code, 2);
  EXPECT_EQ(with({"--algo", "dqn"}).code, 2);
  const auto bad_task = run({"train", "--task", "Bat5", "--seeds", "1", "--out", dir.string()});
  EXPECT_EQ(bad_task.code, 2);
  EXPECT_NE(bad_task.err.find("Bat5"), std::string::npos);
  EXPECT_EQ(run({"continual", "--preset", "batch-up", "--cycles", "0", "--seeds", "1", "--out", dir.string()}).code, 2);
  EXPECT_FALSE(fs::exists(dir / "ppo-Sto0-seed1"));
}

TEST(Cli, UnwritableOutputIsIoError) {
  const auto dir = scratch("unwritable");
  io::write_file(dir / "file", "x");
  const auto r = run(with_fast({"train", "--task", "Sto0", "--seeds", "1", "--steps", "64", "--out", (dir / "file").string()}));
  EXPECT_EQ(r.code, 3);
}

TEST(Cli, MissingCheckpointIsIoError) {
  const auto dir = scratch("nockpt");
  EXPECT_EQ(run({"eval", "--checkpoint", (dir / "absent.json").string()}).code, 3);
  io::write_file(dir / "bad.json", "{\"format\":\"supplyrl-checkpoint\",\"version\":99}");
  EXPECT_EQ(run({"eval", "--checkpoint", (dir / "bad.json").string()}).code, 3);
}

TEST(Cli, NonFiniteLossExitsWithFour) {
  const auto dir = scratch("nan");
  const auto r = run(with_fast({"train", "--task", "Sto0", "--seeds", "1", "--steps", "128", "--out", dir.string(),
                                "--hp", "learning_rate=1e308"}));
  EXPECT_EQ(r.code, 4);
  EXPECT_TRUE(fs::exists(dir / "ppo-Sto0-seed1" / "failure.json"));
}

TEST(Cli, TrainWritesArtefactsPerSeedAndIsDeterministic) {
  const auto a = scratch("train_a"), b = scratch("train_b");
  const auto args = [&](const fs::path& out, const char* jobs) {
    return with_fast({"train", "--task", "Bat3", "--seeds", "1,2,3", "--steps", "192", "--jobs", jobs, "--out", out.string()});
  };
  ASSERT_EQ(run(args(a, "1")).code, 0);
  ASSERT_EQ(run(args(b, "3")).code, 0);
  for (int seed = 1; seed <= 3; ++seed) {
    const auto sub = "ppo-Bat3-seed" + std::to_string(seed);
    for (const char* f : {"curve.csv", "checkpoint.json", "metadata.json"}) {
      ASSERT_TRUE(fs::exists(a / sub / f)) << sub << '/' << f;
      EXPECT_EQ(slurp(a / sub / f), slurp(b / sub / f)) << sub << '/' << f;
    }
    const auto curve = slurp(a / sub / "curve.csv");
    EXPECT_EQ(curve.rfind(std::string(io::kCurveHeader) + "\n", 0), 0u);
    EXPECT_EQ(std::count(curve.begin(), curve.end(), '\n'), 4);
  }
  EXPECT_NE(slurp(a / "ppo-Bat3-seed1" / "curve.csv"), slurp(a / "ppo-Bat3-seed2" / "curve.csv"));
}

TEST(Cli, TrainResumeMatchesUninterruptedRun) {
  const auto dir = scratch("resume");
  ASSERT_EQ(run(with_fast({"train", "--algo", "rppo", "--task", "Sto1", "--seeds", "4", "--steps", "256",
                           "--checkpoint-every", "128", "--out", (dir / "full").string()},
                          kRecurrentWindow))
                .code,
            0);
  const auto full = dir / "full" / "rppo-Sto1-seed4";
  ASSERT_TRUE(fs::exists(full / "checkpoint_128.json"));
  ASSERT_EQ(run(with_fast({"train", "--algo", "rppo", "--task", "Sto1", "--seeds", "4", "--steps", "256", "--resume",
                           (full / "checkpoint_128.json").string(), "--out", (dir / "resumed").string()},
                          kRecurrentWindow))
                .code,
            0);
  const auto resumed = dir / "resumed" / "rppo-Sto1-seed4";
  EXPECT_EQ(slurp(full / "curve.csv"), slurp(resumed / "curve.csv"));
  EXPECT_EQ(slurp(full / "checkpoint.json"), slurp(resumed / "checkpoint.json"));
}

TEST(Cli, ContinualResumeFromBoundaryIsIdentical) {
  const auto dir = scratch("continual");
  const auto args = [&](const fs::path& out) {
    return with_fast({"continual", "--preset", "extreme-bat-to-sto", "--phase-steps", "128", "--cycles", "2", "--seeds",
                      "6", "--out", out.string()});
  };
  ASSERT_EQ(run(args(dir / "full")).code, 0);
  const auto full = dir / "full" / "ppo-extreme-bat-to-sto-seed6";
  for (const char* f : {"continual_curve.csv", "transfer_metrics.json", "checkpoint.json", "metadata.json",
                        "checkpoint_phase1.json", "checkpoint_phase2.json", "checkpoint_phase3.json"})
    EXPECT_TRUE(fs::exists(full / f)) << f;
  auto resume_args = args(dir / "resumed");
  resume_args.insert(resume_args.end(), {"--resume", (full / "checkpoint_phase2.json").string()});
  ASSERT_EQ(run(resume_args).code, 0);
  const auto resumed = dir / "resumed" / "ppo-extreme-bat-to-sto-seed6";
  EXPECT_EQ(slurp(full / "continual_curve.csv"), slurp(resumed / "continual_curve.csv"));
  EXPECT_EQ(slurp(full / "checkpoint.json"), slurp(resumed / "checkpoint.json"));
  EXPECT_EQ(slurp(full / "transfer_metrics.json"), slurp(resumed / "transfer_metrics.json"));
  EXPECT_FALSE(fs::exists(resumed / "checkpoint_phase2.json"));
  EXPECT_TRUE(fs::exists(resumed / "checkpoint_phase3.json"));

  const auto curve = slurp(full / "continual_curve.csv");
  EXPECT_EQ(curve.rfind(std::string(io::kContinualHeader) + "\n", 0), 0u);
  std::size_t boundary_rows = 0;
  std::istringstream lines(curve);
  for (std::string line; std::getline(lines, line);)
    if (line.ends_with(",1")) ++boundary_rows;
  EXPECT_EQ(boundary_rows, 3u);
  const auto metrics = nlohmann::json::parse(slurp(full / "transfer_metrics.json"));
  EXPECT_EQ(metrics.at("phases").size(), 4u);
  EXPECT_EQ(metrics.at("dips").size(), 3u);
}

TEST(Cli, ResumeWithDifferentScheduleIsRejected) {
  const auto dir = scratch("mismatch");
  ASSERT_EQ(run(with_fast({"continual", "--preset", "batch-up", "--phase-steps", "64", "--seeds", "1", "--out",
                           dir.string()}))
                .code,
            0);
  const auto ckpt = dir / "ppo-batch-up-seed1" / "checkpoint_phase1.json";
  EXPECT_EQ(run(with_fast({"continual", "--preset", "batch-down", "--phase-steps", "64", "--seeds", "1", "--resume",
                           ckpt.string(), "--out", dir.string()}))
                .code,
            2);
  EXPECT_EQ(run(with_fast({"train", "--algo", "rppo", "--task", "Bat3", "--seeds", "1", "--resume", ckpt.string(),
                           "--out", dir.string()},
                          kRecurrentWindow))
                .code,
            3);
}

TEST(Cli, ConfigFileSuppliesOptions) {
  const auto dir = scratch("config");
  io::write_file(dir / "run.ini",
                 "[train]\ntask=Sto01\nseeds=[5]\nsteps=64\nhp=[\"n_steps=64\",\"minibatch_size=32\",\"epochs=1\"]\n"
                 "arch=[\"trunk=[8]\"]\nout=\"" +
                     (dir / "out").string() + "\"\nquiet=true\n");
  const auto r = run({"train", "--config", (dir / "run.ini").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto meta = nlohmann::json::parse(slurp(dir / "out" / "ppo-Sto01-seed5" / "metadata.json"));
  EXPECT_EQ(meta.at("learner").at("hyperparams").at("n_steps"), 64);
  EXPECT_EQ(meta.at("learner").at("arch").at("trunk"), nlohmann::json::array({8}));
  EXPECT_EQ(meta.at("run").at("task"), "Sto01");
}

TEST(Cli, OutputRootFromEnvironment) {
  const auto dir = scratch("envout");
  ::setenv(cli::kOutputRootEnv, dir.string().c_str(), 1);
  const auto r = run({"baseline-random", "--task", "Sto0", "--episodes", "3", "--seeds", "2", "--quiet"});
  ::unsetenv(cli::kOutputRootEnv);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto sub = dir / "baseline-Sto0-seed2";
  for (const char* f : {"episode_rewards.csv", "trace.csv", "baseline.json", "metadata.json"})
    EXPECT_TRUE(fs::exists(sub / f)) << f;
  EXPECT_TRUE(r.out.empty());
  const auto summary = nlohmann::json::parse(slurp(sub / "baseline.json"));
  EXPECT_EQ(summary.at("episodes"), 3);
}

TEST(Cli, BaselineEdgeCases) {
  const auto dir = scratch("baseline");
  ASSERT_EQ(run({"baseline-random", "--task", "Bat7", "--episodes", "1", "--seeds", "1", "--out", dir.string()}).code, 0);
  const auto one = nlohmann::json::parse(slurp(dir / "baseline-Bat7-seed1" / "baseline.json"));
  EXPECT_TRUE(one.at("se_reward").is_null());
  EXPECT_FALSE(one.at("mean_reward").is_null());
  ASSERT_EQ(run({"baseline-random", "--task", "Bat7", "--episodes", "0", "--seeds", "2", "--out", dir.string()}).code, 0);
  EXPECT_EQ(slurp(dir / "baseline-Bat7-seed2" / "trace.csv"), std::string(kTraceHeader) + "\n");
  EXPECT_EQ(slurp(dir / "baseline-Bat7-seed2" / "episode_rewards.csv"), "episode,reward\n");
}

TEST(Cli, RolloutTraceAndEval) {
  const auto dir = scratch("rollout");
  ASSERT_EQ(run(with_fast({"train", "--task", "Sto0", "--seeds", "1", "--steps", "128", "--out", dir.string()})).code, 0);
  const auto ckpt = (dir / "ppo-Sto0-seed1" / "checkpoint.json").string();

  ASSERT_EQ(run({"rollout-trace", "--checkpoint", ckpt, "--episodes", "2", "--deterministic", "--out", dir.string(),
                 "--quiet"})
                .code,
            0);
  const auto tdir = dir / "trace-ppo-Sto0-greedy-seed0";
  const auto trace = slurp(tdir / "trace.csv");
  EXPECT_EQ(trace.rfind(std::string(kTraceHeader) + "\n", 0), 0u);
  const auto summary = nlohmann::json::parse(slurp(tdir / "summary.json"));
  EXPECT_EQ(summary.at("episodes"), 2);
  EXPECT_EQ(summary.at("task"), "Sto0");
  EXPECT_EQ(summary.at("mean_order").size(), 3u);
  EXPECT_EQ(static_cast<std::size_t>(std::count(trace.begin(), trace.end(), '\n')),
            summary.at("steps").get<std::size_t>() + 1);

  const auto e1 = run({"eval", "--checkpoint", ckpt, "--episodes", "4", "--task", "Bat10", "--seed", "3"});
  const auto e2 = run({"eval", "--checkpoint", ckpt, "--episodes", "4", "--task", "Bat10", "--seed", "3"});
  ASSERT_EQ(e1.code, 0) << e1.err;
  EXPECT_EQ(e1.out, e2.out);
  const auto j = nlohmann::json::parse(e1.out);
  EXPECT_EQ(j.at("task"), "Bat10");
  EXPECT_EQ(j.at("deterministic"), false);
  EXPECT_EQ(j.at("checkpoint_steps"), 128);
  EXPECT_EQ(run({"eval", "--checkpoint", ckpt, "--seeds", "1,2"}).code, 2);
}

#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "supplyrl/continual.hpp"
#include "supplyrl/core/errors.hpp"
#include "supplyrl/evaluate.hpp"
#include "supplyrl/io/checkpoint.hpp"
#include "supplyrl/io/csv.hpp"
#include "supplyrl/io/metadata.hpp"
#include "supplyrl/io/serialize.hpp"
#include "supplyrl/rl/trainer.hpp"

namespace supplyrl::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kIo = 3, kNumeric = 4 };

inline constexpr const char* kOutputRootEnv = "SUPPLYRL_OUT";

/// Applies one `key=value` override to a JSON-serialisable record. The
/// value is parsed as JSON (bare words fall back to strings) and must match
/// the type of the existing field.
template <class T>
void apply_override(T& record, const std::string& assignment, std::string_view what) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError(std::string(what) + " override must be key=value: '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json j = record;
  if (!j.contains(key)) {
    std::string known;
    for (const auto& [k, v] : j.items()) known += (known.empty() ? "" : ", ") + k;
    throw ConfigError("unknown " + std::string(what) + " key '" + key + "' (known: " + known + ")");
  }
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    value = text;
  }
  const nlohmann::json& current = j.at(key);
  const bool ok = [&] {
    if (current.is_boolean()) return value.is_boolean();
    if (current.is_number_float()) return value.is_number();
    if (current.is_number_unsigned()) return value.is_number_unsigned() || (value.is_number_integer() && value.get<std::int64_t>() >= 0);
    if (current.is_number_integer()) return value.is_number_integer();
    if (current.is_array())
      return value.is_array() && std::all_of(value.begin(), value.end(), [&](const nlohmann::json& v) {
               return current.empty() || v.type() == current.front().type() ||
                      (v.is_number_integer() && current.front().is_number_integer());
             });
    return value.type() == current.type();
  }();
  if (!ok) throw ConfigError(std::string(what) + " key '" + key + "' expects a value like " + current.dump() + ", got '" + text + "'");
  j[key] = value;
  try {
    record = j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(what) + " key '" + key + "': " + e.what());
  }
}

inline nlohmann::json summary_json(const RolloutSummary& s) {
  using rl::detail::nullable;
  return {{"episodes", s.rewards.episodes},
          {"steps", s.steps},
          {"mean_reward", nullable(s.rewards.mean)},
          {"std_reward", nullable(s.rewards.std)},
          {"se_reward", nullable(s.rewards.se)},
          {"mean_order", s.mean_order},
          {"mean_shipped", s.mean_shipped},
          {"mean_reorder_point", s.mean_reorder_point},
          {"mean_retailer_inventory", s.mean_retailer_inventory},
          {"stockout_termination_fraction", s.stockout_termination_fraction}};
}

inline nlohmann::json transfer_json(const std::vector<PhaseLog>& phases, const std::vector<rl::CurvePoint>& curve) {
  using rl::detail::nullable;
  nlohmann::json j;
  j["phases"] = nlohmann::json::array();
  for (const auto& p : phases)
    j["phases"].push_back({{"phase", p.phase},
                           {"task", p.task},
                           {"start_step", p.start_step},
                           {"end_step", p.end_step},
                           {"end_window_mean", nullable(p.end_window_mean)},
                           {"best_window_mean", nullable(p.best_window_mean)}});
  if (phases.size() < 2) {
    j["tasks"] = nullptr;
    j["dips"] = nullptr;
    return j;
  }
  const auto m = transfer_metrics(phases, curve);
  j["tasks"] = nlohmann::json::array();
  for (const auto& t : m.tasks) {
    nlohmann::json ft = nlohmann::json::array(), fg = nlohmann::json::array();
    for (double x : t.forward_transfer) ft.push_back(nullable(x));
    for (double x : t.forgetting) fg.push_back(nullable(x));
    j["tasks"].push_back({{"task", t.task}, {"occurrences", t.occurrences}, {"forward_transfer", ft}, {"forgetting", fg}});
  }
  j["dips"] = nlohmann::json::array();
  for (const auto& d : m.dips) j["dips"].push_back({{"phase", d.phase}, {"task", d.task}, {"dip_depth", nullable(d.dip_depth)}});
  return j;
}

/// Calls `f.template operator()<Agent>()` with the agent type named by `algo`.
template <class F>
decltype(auto) dispatch_algo(const std::string& algo, F&& f) {
  if (algo == rl::PpoAgent::kAlgo) return f.template operator()<rl::PpoAgent>();
  if (algo == rl::RppoAgent::kAlgo) return f.template operator()<rl::RppoAgent>();
  throw ConfigError("unknown algo '" + algo + "' (expected ppo|rppo)");
}

/// Options shared by every verb.
struct CommonOptions {
  std::string out = "runs";
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> env_overrides;
  std::vector<std::string> hp_overrides;
  std::vector<std::string> arch_overrides;
  int jobs = 1;
  bool quiet = false;
};

struct TrainOptions {
  std::string algo = "ppo";
  std::string task;
  std::int64_t steps = 200000;
  std::int64_t checkpoint_every = 0;
  std::string resume;
};

struct ContinualOptions {
  std::string algo = "ppo";
  std::string preset;
  std::int64_t phase_steps = 200000;
  int cycles = 1;
  std::string resume;
};

struct BaselineOptions {
  std::string task;
  std::size_t episodes = 1000;
};

struct RolloutOptions {
  std::string checkpoint;
  std::string task;
  std::size_t episodes = 10;
  bool deterministic = false;
};

inline EnvConfig build_env(const CommonOptions& o) {
  EnvConfig cfg;
  for (const auto& a : o.env_overrides) apply_override(cfg, a, "env");
  cfg.validate();
  return cfg;
}

inline rl::PpoHyperparams build_hp(const std::string& algo, const CommonOptions& o) {
  auto hp = algo == rl::RppoAgent::kAlgo ? rl::PpoHyperparams::rppo_defaults() : rl::PpoHyperparams::ppo_defaults();
  for (const auto& a : o.hp_overrides) apply_override(hp, a, "hyperparameter");
  hp.validate();
  return hp;
}

inline rl::PolicyArch build_arch(const CommonOptions& o) {
  rl::PolicyArch arch;
  for (const auto& a : o.arch_overrides) apply_override(arch, a, "arch");
  return arch;
}

/// Runs `work(seed, log)` for every seed on up to `jobs` threads. Log text is
/// emitted in seed order; the first failure (in seed order) is rethrown.
template <class Work>
void for_each_seed(const std::vector<std::uint64_t>& seeds, int jobs, std::ostream& out, Work&& work) {
  std::vector<std::string> logs(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::size_t next = 0;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      std::size_t k;
      {
        std::lock_guard lock(mu);
        if (next >= seeds.size()) return;
        k = next++;
      }
      std::ostringstream log;
      try {
        work(seeds[k], log);
      } catch (...) {
        errors[k] = std::current_exception();
      }
      logs[k] = log.str();
    }
  };
  const std::size_t n_threads = std::min<std::size_t>(seeds.size(), static_cast<std::size_t>(std::max(jobs, 1)));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& l : logs) out << l;
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

namespace detail {

inline std::string seed_dir(const std::string& prefix, std::uint64_t seed) {
  return prefix + "-seed" + std::to_string(seed);
}

inline std::string fmt_mean(double x) { return std::isnan(x) ? std::string("n/a") : format_double(x); }

/// Writes the diagnostic of a failed run next to its other artefacts.
inline void record_failure(const std::filesystem::path& dir, const TrainingError& e) {
  nlohmann::json j = {{"error", e.what()}, {"diagnostic", e.diagnostic()}};
  try {
    io::write_file(dir / "failure.json", j.dump(2) + '\n');
  } catch (const IoError&) {
  }
}

}  // namespace detail

template <class Agent>
void train_seed(const EnvConfig& env, const TrainOptions& t, const rl::PpoHyperparams& hp, const rl::PolicyArch& arch,
                std::uint64_t seed, const std::filesystem::path& dir, std::optional<nlohmann::json> resume,
                std::ostream& log) {
  const nlohmann::json run = {{"verb", "train"}, {"algo", Agent::kAlgo}, {"task", t.task}, {"steps", t.steps}, {"seed", seed}};
  auto trainer = resume ? io::trainer_from_checkpoint<Agent>(*resume)
                        : rl::Trainer<Agent>(env, {t.task}, rl::kNoPhaseSwitch, hp, arch, seed);
  if (resume && trainer.session().tasks() != std::vector<std::string>{t.task})
    throw ConfigError("checkpoint was trained on a different task");
  std::filesystem::create_directories(dir);
  std::int64_t next_save = t.checkpoint_every > 0 ? (trainer.session().env_steps() / t.checkpoint_every + 1) * t.checkpoint_every : 0;
  try {
    trainer.run(t.steps, [&](const rl::Trainer<Agent>& tr) {
      if (next_save == 0 || tr.session().env_steps() < next_save) return;
      io::save_checkpoint(dir / ("checkpoint_" + std::to_string(tr.session().env_steps()) + ".json"), tr, run);
      next_save = (tr.session().env_steps() / t.checkpoint_every + 1) * t.checkpoint_every;
    });
  } catch (const TrainingError& e) {
    detail::record_failure(dir, e);
    throw;
  }
  io::write_file(dir / "curve.csv", io::curve_csv(Agent::kAlgo, t.task, seed, trainer.curve()));
  io::save_checkpoint(dir / "checkpoint.json", trainer, run);
  io::write_file(dir / "metadata.json",
                 io::run_metadata("train", run, trainer.session().env().config(),
                                  io::learner_metadata(Agent::kAlgo, trainer.agent().hyperparams(), trainer.agent().arch()),
                                  seed)
                         .dump(2) +
                     '\n');
  log << Agent::kAlgo << ' ' << t.task << " seed " << seed << ": " << trainer.session().env_steps()
      << " steps, window mean " << detail::fmt_mean(trainer.session().window().mean()) << " -> " << dir.string() << '\n';
}

template <class Agent>
void continual_seed(const EnvConfig& env, const ContinualOptions& c, const rl::PpoHyperparams& hp,
                    const rl::PolicyArch& arch, std::uint64_t seed, const std::filesystem::path& dir,
                    std::optional<nlohmann::json> resume, std::ostream& log) {
  const TaskSchedule schedule = make_schedule(c.preset, c.phase_steps, c.cycles);
  schedule.validate(hp.n_steps);
  const nlohmann::json run = {{"verb", "continual"}, {"algo", Agent::kAlgo}, {"preset", c.preset},
                              {"phase_steps", c.phase_steps}, {"cycles", c.cycles}, {"seed", seed}};
  auto trainer = resume ? io::trainer_from_checkpoint<Agent>(*resume)
                        : rl::Trainer<Agent>(env, schedule.tasks, schedule.phase_length, hp, arch, seed);
  if (resume && (trainer.session().tasks() != schedule.tasks || trainer.session().phase_length() != schedule.phase_length))
    throw ConfigError("checkpoint schedule does not match --preset/--phase-steps/--cycles");
  std::filesystem::create_directories(dir);
  try {
    continue_continual(trainer, schedule.total_steps(), [&](const rl::Trainer<Agent>& tr, std::size_t phase) {
      io::save_checkpoint(dir / ("checkpoint_phase" + std::to_string(phase) + ".json"), tr, run);
    });
  } catch (const TrainingError& e) {
    detail::record_failure(dir, e);
    throw;
  }
  const auto phases = phase_logs(trainer);
  io::write_file(dir / "continual_curve.csv",
                 io::continual_csv(Agent::kAlgo, c.preset, seed, trainer.session().tasks(), trainer.curve(),
                                   trainer.session().boundaries(), trainer.session().window().capacity()));
  io::write_file(dir / "transfer_metrics.json", transfer_json(phases, trainer.curve()).dump(2) + '\n');
  io::save_checkpoint(dir / "checkpoint.json", trainer, run);
  io::write_file(dir / "metadata.json",
                 io::run_metadata("continual", run, trainer.session().env().config(),
                                  io::learner_metadata(Agent::kAlgo, trainer.agent().hyperparams(), trainer.agent().arch()),
                                  seed)
                         .dump(2) +
                     '\n');
  log << Agent::kAlgo << ' ' << c.preset << " seed " << seed << ": " << phases.size() << " phases, "
      << trainer.session().env_steps() << " steps -> " << dir.string() << '\n';
}

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Supply chain reinforcement learning workbench"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI/TOML file whose [verb] section mirrors the command-line flags");
  app.fallthrough();
  CommonOptions common;
  TrainOptions train_opt;
  ContinualOptions cont_opt;
  BaselineOptions base_opt;
  RolloutOptions roll_opt;

  auto add_common = [&](CLI::App* sub, bool with_learner) {
    sub->add_option("--out", common.out, "Output root directory")->envname(kOutputRootEnv)->capture_default_str();
    sub->add_option("--env", common.env_overrides, "Environment override key=value (repeatable)");
    if (with_learner) {
      sub->add_option("--hp", common.hp_overrides, "Hyperparameter override key=value (repeatable)");
      sub->add_option("--arch", common.arch_overrides, "Network override key=value, e.g. trunk=[64,64] (repeatable)");
      sub->add_option("--jobs", common.jobs, "Seeds run in parallel")->check(CLI::PositiveNumber)->capture_default_str();
    }
    sub->add_flag("--quiet", common.quiet, "Suppress progress output");
  };

  auto* train = app.add_subcommand("train", "Train one learner per seed on a single task");
  add_common(train, true);
  train->add_option("--algo", train_opt.algo, "ppo or rppo")->check(CLI::IsMember({"ppo", "rppo"}))->capture_default_str();
  train->add_option("--task", train_opt.task, "Demand task")->required();
  train->add_option("--seeds,--seed", common.seeds, "Seed list, comma separated")->delimiter(',')->required();
  train->add_option("--steps", train_opt.steps, "Environment steps per seed")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--checkpoint-every", train_opt.checkpoint_every, "Extra checkpoint interval in steps (0 = off)")
      ->check(CLI::NonNegativeNumber);
  train->add_option("--resume", train_opt.resume, "Continue from a checkpoint (single seed)");

  auto* cont = app.add_subcommand("continual", "Train one learner per seed through a task schedule");
  add_common(cont, true);
  cont->add_option("--algo", cont_opt.algo, "ppo or rppo")->check(CLI::IsMember({"ppo", "rppo"}))->capture_default_str();
  cont->add_option("--preset", cont_opt.preset, "Schedule preset")->required();
  cont->add_option("--phase-steps", cont_opt.phase_steps, "Environment steps per phase")->capture_default_str();
  cont->add_option("--cycles", cont_opt.cycles, "Repetitions of the preset")->capture_default_str();
  cont->add_option("--seeds,--seed", common.seeds, "Seed list, comma separated")->delimiter(',')->required();
  cont->add_option("--resume", cont_opt.resume, "Continue from a boundary checkpoint (single seed)");

  auto* base = app.add_subcommand("baseline-random", "Uniformly random actions on a task");
  add_common(base, false);
  base->add_option("--task", base_opt.task, "Demand task")->required();
  base->add_option("--episodes", base_opt.episodes, "Episodes per seed")->capture_default_str();
  base->add_option("--seeds,--seed", common.seeds, "Seed list, comma separated")->delimiter(',')->required();

  auto add_rollout = [&](CLI::App* sub) {
    add_common(sub, false);
    sub->add_option("--checkpoint", roll_opt.checkpoint, "Checkpoint file")->required();
    sub->add_option("--task", roll_opt.task, "Demand task (default: the checkpoint's current task)");
    sub->add_option("--episodes", roll_opt.episodes, "Episodes")->capture_default_str();
    sub->add_flag("--deterministic", roll_opt.deterministic, "Greedy actions instead of sampling");
    sub->add_option("--seeds,--seed", common.seeds, "Evaluation seed")->delimiter(',');
  };
  auto* trace = app.add_subcommand("rollout-trace", "Step trace and behaviour summary of a trained policy");
  add_rollout(trace);
  auto* eval = app.add_subcommand("eval", "Reward statistics of a trained policy");
  add_rollout(eval);

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      for (auto* sub : app.get_subcommands()) out << sub->help();
      return kOk;
    }
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  std::ostringstream sink;
  std::ostream& progress = common.quiet ? static_cast<std::ostream&>(sink) : out;
  const std::filesystem::path root = common.out;

  try {
    const EnvConfig env = build_env(common);
    if (train->parsed()) {
      make_task(train_opt.task);
      const auto hp = build_hp(train_opt.algo, common);
      const auto arch = build_arch(common);
      std::optional<nlohmann::json> resume;
      if (!train_opt.resume.empty()) {
        if (common.seeds.size() != 1) throw ConfigError("--resume takes exactly one seed");
        resume = io::load_checkpoint(train_opt.resume);
      }
      dispatch_algo(train_opt.algo, [&]<class Agent>() {
        for_each_seed(common.seeds, common.jobs, progress, [&](std::uint64_t seed, std::ostream& log) {
          const auto dir = root / detail::seed_dir(train_opt.algo + "-" + train_opt.task, seed);
          train_seed<Agent>(env, train_opt, hp, arch, seed, dir, resume, log);
        });
      });
    } else if (cont->parsed()) {
      const auto hp = build_hp(cont_opt.algo, common);
      const auto arch = build_arch(common);
      make_schedule(cont_opt.preset, cont_opt.phase_steps, cont_opt.cycles).validate(hp.n_steps);
      std::optional<nlohmann::json> resume;
      if (!cont_opt.resume.empty()) {
        if (common.seeds.size() != 1) throw ConfigError("--resume takes exactly one seed");
        resume = io::load_checkpoint(cont_opt.resume);
      }
      dispatch_algo(cont_opt.algo, [&]<class Agent>() {
        for_each_seed(common.seeds, common.jobs, progress, [&](std::uint64_t seed, std::ostream& log) {
          const auto dir = root / detail::seed_dir(cont_opt.algo + "-" + cont_opt.preset, seed);
          continual_seed<Agent>(env, cont_opt, hp, arch, seed, dir, resume, log);
        });
      });
    } else if (base->parsed()) {
      make_task(base_opt.task);
      for (const auto seed : common.seeds) {
        std::vector<TraceRow> rows;
        const auto s = random_baseline(env, base_opt.task, base_opt.episodes, seed, &rows);
        const auto dir = root / detail::seed_dir("baseline-" + base_opt.task, seed);
        nlohmann::json summary = summary_json(s);
        summary["task"] = base_opt.task;
        summary["seed"] = seed;
        io::write_file(dir / "episode_rewards.csv", io::episode_rewards_csv(s.episode_rewards));
        io::write_file(dir / "trace.csv", io::trace_csv(rows));
        io::write_file(dir / "baseline.json", summary.dump(2) + '\n');
        io::write_file(dir / "metadata.json",
                       io::run_metadata("baseline-random", {{"task", base_opt.task}, {"episodes", base_opt.episodes}},
                                        env, nullptr, seed)
                               .dump(2) +
                           '\n');
        progress << "baseline " << base_opt.task << " seed " << seed << ": mean " << detail::fmt_mean(s.rewards.mean)
                 << ", se " << detail::fmt_mean(s.rewards.se) << " -> " << dir.string() << '\n';
      }
    } else {
      const bool tracing = trace->parsed();
      const auto checkpoint = io::load_checkpoint(roll_opt.checkpoint);
      const std::uint64_t seed = common.seeds.empty() ? 0 : common.seeds.front();
      if (common.seeds.size() > 1) throw ConfigError("rollout-trace and eval take a single seed");
      dispatch_algo(io::checkpoint_algo(checkpoint), [&]<class Agent>() {
        const auto trainer = io::trainer_from_checkpoint<Agent>(checkpoint);
        const EnvConfig& cfg = common.env_overrides.empty() ? trainer.session().env().config() : env;
        const std::string task = roll_opt.task.empty() ? trainer.session().task() : roll_opt.task;
        make_task(task);
        std::vector<TraceRow> rows;
        const auto s = evaluate_agent(trainer.agent(), cfg, task, roll_opt.episodes, seed, roll_opt.deterministic,
                                      tracing ? &rows : nullptr);
        nlohmann::json summary = summary_json(s);
        summary["algo"] = Agent::kAlgo;
        summary["task"] = task;
        summary["seed"] = seed;
        summary["deterministic"] = roll_opt.deterministic;
        summary["checkpoint_steps"] = trainer.session().env_steps();
        if (!tracing) {
          out << summary.dump(2) << '\n';
          return;
        }
        const auto dir = root / detail::seed_dir(std::string("trace-") + Agent::kAlgo + "-" + task + "-" +
                                                     (roll_opt.deterministic ? "greedy" : "sampled"),
                                                 seed);
        io::write_file(dir / "trace.csv", io::trace_csv(rows));
        io::write_file(dir / "summary.json", summary.dump(2) + '\n');
        progress << "trace " << task << ": " << s.rewards.episodes << " episodes, factory mean order "
                 << format_double(s.mean_order[kFactory]) << ", stockout terminations "
                 << format_double(s.stockout_termination_fraction) << " -> " << dir.string() << '\n';
      });
    }
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const TrainingError& e) {
    err << "numeric failure: " << e.what() << '\n' << e.diagnostic() << '\n';
    return kNumeric;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kIo;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIo;
  }
  return kOk;
}

}  // namespace supplyrl::cli

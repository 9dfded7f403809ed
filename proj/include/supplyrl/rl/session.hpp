#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "supplyrl/core/errors.hpp"
#include "supplyrl/core/rng.hpp"
#include "supplyrl/demand.hpp"
#include "supplyrl/env.hpp"
#include "supplyrl/io/serialize.hpp"
#include "supplyrl/rl/rollout.hpp"
#include "supplyrl/trace.hpp"

namespace supplyrl::rl {

inline constexpr std::int64_t kNoPhaseSwitch = std::numeric_limits<std::int64_t>::max();

/// Demand seed of a phase: every phase gets its own stream derived from the
/// run seed, so phase 0 of a continual run matches a plain training run.
inline std::uint64_t phase_demand_seed(std::uint64_t run_seed, std::size_t phase) {
  return derive_seed(run_seed, streams::kDemandBase + phase);
}

struct PhaseBoundary {
  std::size_t phase = 0;  // index of the phase that starts here
  std::int64_t env_step = 0;
  std::vector<double> window_snapshot;  // reward window just before the switch

  friend bool operator==(const PhaseBoundary&, const PhaseBoundary&) = default;
};

/// The environment side of a learning run: simulator, current observation,
/// running episode return, step counter, reward window and the task
/// schedule.
///
/// Episodes reset automatically. Phase p+1 begins at the first episode
/// reset once `env_steps >= (p + 1) * phase_length`; only the demand regime
/// changes at a switch.
class EnvSession {
 public:
  using TraceHook = std::function<void(const TraceRow&)>;

  EnvSession() = default;
  EnvSession(EnvConfig config, std::vector<std::string> tasks, std::int64_t phase_length, std::uint64_t run_seed,
             std::size_t window_size)
      : tasks_(std::move(tasks)), phase_length_(phase_length), run_seed_(run_seed), window_(window_size) {
    if (tasks_.empty()) throw ConfigError("session needs at least one task");
    if (phase_length_ <= 0) throw ConfigError("phase length must be > 0");
    for (const auto& t : tasks_) make_task(t);
    env_ = SupplyChainEnv(config, make_task(tasks_[0]), phase_demand_seed(run_seed_, 0));
    obs_ = env_.observation();
  }

  struct Outcome {
    double reward = 0.0;
    bool done = false;
  };

  Outcome advance(const ActionVector& action) {
    const int day = env_.state().day;
    const StepResult r = env_.step(action);
    ++env_steps_;
    episode_reward_ += r.reward;
    if (trace_) trace_(make_trace_row(day, tasks_[phase_], action, r, env_.state(), env_.config()));
    if (r.done) {
      window_.push(episode_reward_);
      ++episodes_;
      episode_reward_ = 0.0;
      maybe_switch_phase();
      obs_ = env_.reset();
      episode_start_ = true;
    } else {
      obs_ = r.observation;
      episode_start_ = false;
    }
    return {r.reward, r.done};
  }

  void set_trace_hook(TraceHook hook) { trace_ = std::move(hook); }

  const Observation& observation() const noexcept { return obs_; }
  bool episode_start() const noexcept { return episode_start_; }
  std::int64_t env_steps() const noexcept { return env_steps_; }
  std::int64_t episodes() const noexcept { return episodes_; }
  double episode_reward() const noexcept { return episode_reward_; }
  const EpisodeRewardWindow& window() const noexcept { return window_; }
  std::size_t phase() const noexcept { return phase_; }
  std::size_t phase_count() const noexcept { return tasks_.size(); }
  const std::string& task() const { return tasks_[phase_]; }
  const std::vector<std::string>& tasks() const noexcept { return tasks_; }
  std::int64_t phase_length() const noexcept { return phase_length_; }
  const std::vector<PhaseBoundary>& boundaries() const noexcept { return boundaries_; }
  const SupplyChainEnv& env() const noexcept { return env_; }
  std::uint64_t run_seed() const noexcept { return run_seed_; }

  friend void to_json(nlohmann::json& j, const EnvSession& s) {
    nlohmann::json bounds = nlohmann::json::array();
    for (const auto& b : s.boundaries_)
      bounds.push_back({{"phase", b.phase}, {"env_step", b.env_step}, {"window", b.window_snapshot}});
    j = {{"tasks", s.tasks_},
         {"phase_length", s.phase_length_},
         {"run_seed", s.run_seed_},
         {"env", s.env_},
         {"obs", s.obs_},
         {"episode_start", s.episode_start_},
         {"episode_reward", s.episode_reward_},
         {"env_steps", s.env_steps_},
         {"episodes", s.episodes_},
         {"window_size", s.window_.capacity()},
         {"window", s.window_.contents()},
         {"phase", s.phase_},
         {"boundaries", bounds}};
  }

  friend void from_json(const nlohmann::json& j, EnvSession& s) {
    s.tasks_ = j.at("tasks").get<std::vector<std::string>>();
    s.phase_length_ = j.at("phase_length").get<std::int64_t>();
    s.run_seed_ = j.at("run_seed").get<std::uint64_t>();
    s.env_ = j.at("env").get<SupplyChainEnv>();
    s.obs_ = j.at("obs").get<Observation>();
    s.episode_start_ = j.at("episode_start").get<bool>();
    s.episode_reward_ = j.at("episode_reward").get<double>();
    s.env_steps_ = j.at("env_steps").get<std::int64_t>();
    s.episodes_ = j.at("episodes").get<std::int64_t>();
    s.window_ = EpisodeRewardWindow(j.at("window_size").get<std::size_t>());
    s.window_.assign(j.at("window").get<std::vector<double>>());
    s.phase_ = j.at("phase").get<std::size_t>();
    s.boundaries_.clear();
    for (const auto& b : j.at("boundaries"))
      s.boundaries_.push_back({b.at("phase").get<std::size_t>(), b.at("env_step").get<std::int64_t>(),
                               b.at("window").get<std::vector<double>>()});
    if (s.tasks_.empty() || s.phase_ >= s.tasks_.size()) throw CheckpointError("corrupt session state");
  }

 private:
  void maybe_switch_phase() {
    const std::size_t next = phase_ + 1;
    if (next >= tasks_.size()) return;
    if (phase_length_ == kNoPhaseSwitch) return;
    if (env_steps_ < static_cast<std::int64_t>(next) * phase_length_) return;
    boundaries_.push_back({next, env_steps_, window_.contents()});
    phase_ = next;
    env_.set_task(make_task(tasks_[phase_]), phase_demand_seed(run_seed_, phase_));
  }

  std::vector<std::string> tasks_;
  std::int64_t phase_length_ = kNoPhaseSwitch;
  std::uint64_t run_seed_ = 0;
  SupplyChainEnv env_;
  Observation obs_{};
  bool episode_start_ = true;
  double episode_reward_ = 0.0;
  std::int64_t env_steps_ = 0;
  std::int64_t episodes_ = 0;
  EpisodeRewardWindow window_{100};
  std::size_t phase_ = 0;
  std::vector<PhaseBoundary> boundaries_;
  TraceHook trace_;
};

}  // namespace supplyrl::rl

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "supplyrl/core/errors.hpp"
#include "supplyrl/core/rng.hpp"
#include "supplyrl/env.hpp"
#include "supplyrl/rl/policy.hpp"
#include "supplyrl/rl/session.hpp"
#include "supplyrl/trace.hpp"

namespace supplyrl {

/// Mean, sample standard deviation and standard error of episode rewards.
/// std and se are NaN when fewer than two episodes are available.
struct RewardStats {
  std::size_t episodes = 0;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();
};

inline RewardStats reward_stats(const std::vector<double>& rewards) {
  RewardStats s;
  s.episodes = rewards.size();
  if (rewards.empty()) return s;
  double sum = 0.0;
  for (double r : rewards) sum += r;
  s.mean = sum / static_cast<double>(rewards.size());
  if (rewards.size() < 2) return s;
  double sq = 0.0;
  for (double r : rewards) sq += (r - s.mean) * (r - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(rewards.size() - 1));
  s.se = s.std / std::sqrt(static_cast<double>(rewards.size()));
  return s;
}

/// Aggregate behaviour over a batch of evaluation episodes.
struct RolloutSummary {
  std::vector<double> episode_rewards;
  RewardStats rewards;
  std::int64_t steps = 0;
  std::array<double, kEchelons> mean_order{};
  std::array<double, kEchelons> mean_shipped{};
  double mean_reorder_point = 0.0;
  double mean_retailer_inventory = 0.0;
  double stockout_termination_fraction = 0.0;  // episodes ended by exceeding the stockout limit
};

/// Runs `episodes` episodes on a fresh simulator seeded from `seed`.
/// `choose(obs, episode_start)` returns the action for each step. Trace rows
/// are appended to `trace` when given.
template <class Choose>
RolloutSummary run_episodes(const EnvConfig& config, const std::string& task, std::size_t episodes,
                            std::uint64_t seed, Choose&& choose, std::vector<TraceRow>* trace = nullptr) {
  SupplyChainEnv env(config, make_task(task), rl::phase_demand_seed(seed, 0));
  RolloutSummary s;
  std::size_t stockout_ends = 0;
  for (std::size_t e = 0; e < episodes; ++e) {
    Observation obs = env.reset();
    bool start = true;
    double total = 0.0;
    for (;;) {
      const ActionVector action = clamp_action(choose(obs, start), config);
      const int day = env.state().day;
      const StepResult r = env.step(action);
      if (trace != nullptr) trace->push_back(make_trace_row(day, task, action, r, env.state(), config));
      total += r.reward;
      ++s.steps;
      for (int i = 0; i < kEchelons; ++i) {
        s.mean_order[i] += action.order[i];
        s.mean_shipped[i] += r.info.shipped[i];
      }
      s.mean_reorder_point += action.reorder_point;
      s.mean_retailer_inventory += env.state().inventory[kRetailer];
      obs = r.observation;
      start = false;
      if (r.done) {
        if (env.state().stockout_count > config.max_stockouts) ++stockout_ends;
        break;
      }
    }
    s.episode_rewards.push_back(total);
  }
  if (s.steps > 0) {
    const double n = static_cast<double>(s.steps);
    for (int i = 0; i < kEchelons; ++i) {
      s.mean_order[i] /= n;
      s.mean_shipped[i] /= n;
    }
    s.mean_reorder_point /= n;
    s.mean_retailer_inventory /= n;
  }
  if (episodes > 0) s.stockout_termination_fraction = static_cast<double>(stockout_ends) / static_cast<double>(episodes);
  s.rewards = reward_stats(s.episode_rewards);
  return s;
}

/// Uniformly random actions over the full discrete action space.
inline RolloutSummary random_baseline(const EnvConfig& config, const std::string& task, std::size_t episodes,
                                      std::uint64_t seed, std::vector<TraceRow>* trace = nullptr) {
  Rng rng(derive_seed(seed, streams::kBaseline));
  const auto sizes = rl::head_sizes(config);
  auto choose = [&](const Observation&, bool) {
    rl::HeadIndices idx;
    for (std::size_t k = 0; k < rl::kHeads; ++k) idx[k] = static_cast<int>(rng.below(sizes[k]));
    return rl::to_action(idx);
  };
  return run_episodes(config, task, episodes, seed, choose, trace);
}

/// Runs a trained agent; greedy when `deterministic`, sampled otherwise.
template <class Agent>
RolloutSummary evaluate_agent(const Agent& agent, const EnvConfig& config, const std::string& task,
                              std::size_t episodes, std::uint64_t seed, bool deterministic,
                              std::vector<TraceRow>* trace = nullptr) {
  Rng rng(derive_seed(seed, streams::kSampling));
  auto carry = agent.initial_carry();
  auto choose = [&](const Observation& obs, bool start) {
    return agent.policy_step(obs, start, deterministic ? nullptr : &rng, carry).action();
  };
  return run_episodes(config, task, episodes, seed, choose, trace);
}

}  // namespace supplyrl

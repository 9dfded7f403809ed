#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <numeric>
#include <vector>

#include "supplyrl/core/errors.hpp"
#include "supplyrl/env.hpp"
#include "supplyrl/rl/policy.hpp"

namespace supplyrl::rl {

struct Transition {
  Observation obs{};
  HeadIndices action{};
  double log_prob = 0.0;
  double reward = 0.0;
  double value = 0.0;
  bool done = false;           // this step ended its episode
  bool episode_start = false;  // obs is the first of an episode
};

struct RolloutBuffer {
  std::vector<Transition> steps;
  double last_value = 0.0;  // V of the observation following the final step
  std::vector<double> advantages;
  std::vector<double> returns;

  std::size_t size() const noexcept { return steps.size(); }
};

/// Recurrent buffers additionally store the LSTM state at the start of
/// every step; it is zero whenever `episode_start` is set.
struct RecurrentRolloutBuffer : RolloutBuffer {
  std::vector<std::vector<double>> h;
  std::vector<std::vector<double>> c;
};

/// delta_t = r_t + gamma V(s_{t+1}) (1 - done_t) - V(s_t)
/// A_t     = delta_t + gamma lambda (1 - done_t) A_{t+1}
/// R_t     = A_t + V(s_t)
inline void compute_gae(RolloutBuffer& buffer, double gamma, double lambda) {
  const std::size_t n = buffer.steps.size();
  buffer.advantages.assign(n, 0.0);
  buffer.returns.assign(n, 0.0);
  double next_advantage = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const auto& s = buffer.steps[t];
    const double next_value = t + 1 < n ? buffer.steps[t + 1].value : buffer.last_value;
    const double not_done = s.done ? 0.0 : 1.0;
    const double delta = s.reward + gamma * next_value * not_done - s.value;
    next_advantage = delta + gamma * lambda * not_done * next_advantage;
    buffer.advantages[t] = next_advantage;
    buffer.returns[t] = next_advantage + s.value;
  }
}

/// Trailing window over completed-episode total rewards.
class EpisodeRewardWindow {
 public:
  explicit EpisodeRewardWindow(std::size_t capacity = 100) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("stats window size must be >= 1");
  }

  void push(double episode_reward) {
    values_.push_back(episode_reward);
    if (values_.size() > capacity_) values_.pop_front();
  }

  /// NaN while no episode has completed.
  double mean() const {
    if (values_.empty()) return std::numeric_limits<double>::quiet_NaN();
    return std::accumulate(values_.begin(), values_.end(), 0.0) / static_cast<double>(values_.size());
  }

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::vector<double> contents() const { return {values_.begin(), values_.end()}; }
  void assign(const std::vector<double>& values) {
    values_.clear();
    for (double v : values) push(v);
  }

  friend bool operator==(const EpisodeRewardWindow&, const EpisodeRewardWindow&) = default;

 private:
  std::size_t capacity_;
  std::deque<double> values_;
};

}  // namespace supplyrl::rl

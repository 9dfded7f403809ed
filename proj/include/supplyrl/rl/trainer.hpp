#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "supplyrl/core/errors.hpp"
#include "supplyrl/core/rng.hpp"
#include "supplyrl/env.hpp"
#include "supplyrl/rl/ppo.hpp"
#include "supplyrl/rl/rppo.hpp"
#include "supplyrl/rl/session.hpp"

namespace supplyrl::rl {

/// One learning-curve sample, logged after every rollout + update.
struct CurvePoint {
  std::int64_t env_steps = 0;
  double window_mean = 0.0;  // NaN before the first completed episode
  LossStats loss;
  std::size_t phase = 0;

  friend bool operator==(const CurvePoint& a, const CurvePoint& b) {
    auto same = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
    return a.env_steps == b.env_steps && same(a.window_mean, b.window_mean) && a.phase == b.phase &&
           a.loss.policy_loss == b.loss.policy_loss && a.loss.value_loss == b.loss.value_loss &&
           a.loss.entropy == b.loss.entropy && a.loss.clip_fraction == b.loss.clip_fraction &&
           a.loss.total_loss == b.loss.total_loss;
  }
};

namespace detail {
inline nlohmann::json nullable(double x) { return std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x); }
inline double from_nullable(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}
}  // namespace detail

inline void to_json(nlohmann::json& j, const CurvePoint& p) {
  j = {{"env_steps", p.env_steps},
       {"window_mean", detail::nullable(p.window_mean)},
       {"policy_loss", p.loss.policy_loss},
       {"value_loss", p.loss.value_loss},
       {"entropy", p.loss.entropy},
       {"clip_fraction", p.loss.clip_fraction},
       {"total_loss", p.loss.total_loss},
       {"phase", p.phase}};
}
inline void from_json(const nlohmann::json& j, CurvePoint& p) {
  j.at("env_steps").get_to(p.env_steps);
  p.window_mean = detail::from_nullable(j.at("window_mean"));
  j.at("policy_loss").get_to(p.loss.policy_loss);
  j.at("value_loss").get_to(p.loss.value_loss);
  j.at("entropy").get_to(p.loss.entropy);
  j.at("clip_fraction").get_to(p.loss.clip_fraction);
  j.at("total_loss").get_to(p.loss.total_loss);
  j.at("phase").get_to(p.phase);
}

/// A complete, resumable learning run: agent, environment session,
/// sampling generator and the learning curve so far.
///
/// `Agent` is PpoAgent or RppoAgent.
template <class Agent>
class Trainer {
 public:
  Trainer(const EnvConfig& env_config, std::vector<std::string> tasks, std::int64_t phase_length,
          const PpoHyperparams& hp, const PolicyArch& arch, std::uint64_t seed)
      : agent_(env_config, hp, arch, seed),
        session_(env_config, std::move(tasks), phase_length, seed, hp.stats_window_size),
        rng_(derive_seed(seed, streams::kSampling)),
        seed_(seed) {}

  static constexpr const char* algo() { return Agent::kAlgo; }

  /// Alternates collection and update until at least `target_steps`
  /// environment steps are consumed and every scheduled phase has begun.
  /// `on_iteration(*this)` runs after each update.
  template <class Callback>
  void run(std::int64_t target_steps, Callback&& on_iteration) {
    while (session_.env_steps() < target_steps ||
           (session_.phase_length() != kNoPhaseSwitch && session_.phase() + 1 < session_.phase_count())) {
      iterate();
      on_iteration(*this);
    }
  }

  void run(std::int64_t target_steps) {
    run(target_steps, [](const Trainer&) {});
  }

  /// One rollout + update; appends a curve point.
  const CurvePoint& iterate() {
    auto buffer = agent_.collect(session_, rng_);
    const LossStats stats = agent_.update(buffer, rng_);
    curve_.push_back({session_.env_steps(), session_.window().mean(), stats, session_.phase()});
    return curve_.back();
  }

  Agent& agent() noexcept { return agent_; }
  const Agent& agent() const noexcept { return agent_; }
  EnvSession& session() noexcept { return session_; }
  const EnvSession& session() const noexcept { return session_; }
  const std::vector<CurvePoint>& curve() const noexcept { return curve_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const Rng& rng() const noexcept { return rng_; }

  nlohmann::json to_json() const {
    nlohmann::json agent_json = agent_;
    return {{"seed", seed_}, {"rng", rng_.serialize()}, {"agent", agent_json},
            {"session", session_}, {"curve", curve_}};
  }

  static Trainer from_json(const nlohmann::json& j) {
    auto session = j.at("session").get<EnvSession>();
    const auto hp = j.at("agent").at("hyperparams").get<PpoHyperparams>();
    const auto arch = j.at("agent").at("arch").get<PolicyArch>();
    const auto seed = j.at("seed").get<std::uint64_t>();
    Trainer t(session.env().config(), session.tasks(), session.phase_length(), hp, arch, seed);
    t.agent_.load_json(j.at("agent"));
    t.session_ = std::move(session);
    t.rng_.deserialize(j.at("rng").get<std::string>());
    t.curve_ = j.at("curve").get<std::vector<CurvePoint>>();
    return t;
  }

 private:
  Agent agent_;
  EnvSession session_;
  Rng rng_;
  std::uint64_t seed_;
  std::vector<CurvePoint> curve_;
};

using PpoTrainer = Trainer<PpoAgent>;
using RppoTrainer = Trainer<RppoAgent>;

/// Plain single-task training.
template <class Agent>
Trainer<Agent> train(const EnvConfig& env_config, const std::string& task, const PpoHyperparams& hp,
                     const PolicyArch& arch, std::int64_t total_steps, std::uint64_t seed) {
  Trainer<Agent> trainer(env_config, {task}, kNoPhaseSwitch, hp, arch, seed);
  trainer.run(total_steps);
  return trainer;
}

}  // namespace supplyrl::rl

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "supplyrl/core/errors.hpp"
#include "supplyrl/core/rng.hpp"
#include "supplyrl/nn/adam.hpp"
#include "supplyrl/nn/lstm.hpp"
#include "supplyrl/rl/policy.hpp"
#include "supplyrl/rl/ppo.hpp"
#include "supplyrl/rl/rollout.hpp"
#include "supplyrl/rl/session.hpp"

namespace supplyrl::rl {

struct RecurrentCarry {
  std::vector<double> h;
  std::vector<double> c;

  void zero() {
    std::fill(h.begin(), h.end(), 0.0);
    std::fill(c.begin(), c.end(), 0.0);
  }
  friend bool operator==(const RecurrentCarry&, const RecurrentCarry&) = default;
};

/// Replays a stored window through the recurrent policy: starts from the
/// stored state of step 0 and zeroes the state at every episode start.
inline void rppo_replay(const RecurrentActorCritic& policy, std::span<const double> params,
                        const RecurrentRolloutBuffer& buffer, std::vector<RecurrentActorCritic::Forward>& fwd) {
  const std::size_t n = buffer.size();
  fwd.resize(n);
  if (n == 0) return;
  std::vector<double> h = buffer.h[0], c = buffer.c[0];
  for (std::size_t t = 0; t < n; ++t) {
    if (buffer.steps[t].episode_start) {
      std::fill(h.begin(), h.end(), 0.0);
      std::fill(c.begin(), c.end(), 0.0);
    }
    policy.forward(params, buffer.steps[t].obs, h, c, fwd[t]);
    h = fwd[t].lstm.h;
    c = fwd[t].lstm.c;
  }
}

inline std::vector<double> rppo_replay_log_probs(const RecurrentActorCritic& policy, std::span<const double> params,
                                                 const RecurrentRolloutBuffer& buffer) {
  std::vector<RecurrentActorCritic::Forward> fwd;
  rppo_replay(policy, params, buffer, fwd);
  std::vector<double> lp;
  for (std::size_t t = 0; t < buffer.size(); ++t) lp.push_back(joint_stats(fwd[t].out, buffer.steps[t].action).log_prob);
  return lp;
}

/// Total loss over the whole window, with backpropagation through time
/// into `grad` unless it is empty. Gradient does not cross episode starts
/// nor reach the stored initial state.
inline LossStats rppo_window_loss(const RecurrentActorCritic& policy, std::span<const double> params,
                                  const RecurrentRolloutBuffer& buffer, const PpoHyperparams& hp,
                                  std::span<double> grad) {
  const std::size_t n = buffer.size();
  std::vector<double> adv = buffer.advantages;
  if (hp.normalize_advantage) normalize_advantages(adv);
  const double inv_n = 1.0 / static_cast<double>(n);
  const bool want_grad = !grad.empty();

  std::vector<RecurrentActorCritic::Forward> fwd;
  rppo_replay(policy, params, buffer, fwd);

  LossStats total;
  std::array<std::vector<double>, kHeads> dlogits;
  double dvalue = 0.0;
  std::vector<std::vector<double>> dh_out(n, std::vector<double>(policy.hidden(), 0.0));
  for (std::size_t t = 0; t < n; ++t) {
    const Transition& s = buffer.steps[t];
    total += sample_loss(fwd[t].out, s.action, s.log_prob, adv[t], buffer.returns[t], inv_n, hp,
                         want_grad ? &dlogits : nullptr, &dvalue);
    if (want_grad)
      policy.heads().backward(params, fwd[t].lstm.h, fwd[t].out, dlogits, dvalue, grad, dh_out[t]);
  }
  if (!want_grad) return total;

  std::vector<nn::LstmCache> caches;
  caches.reserve(n);
  std::vector<std::uint8_t> resets(n);
  for (std::size_t t = 0; t < n; ++t) {
    caches.push_back(fwd[t].lstm);
    resets[t] = buffer.steps[t].episode_start ? 1 : 0;
  }
  std::vector<std::vector<double>> dproj(n);
  nn::lstm_bptt(policy.lstm(), params, caches, dh_out, resets, grad, dproj);
  for (std::size_t t = 0; t < n; ++t)
    policy.projection().backward(params, buffer.steps[t].obs, fwd[t].projected, dproj[t], grad, {});
  return total;
}

/// Recurrent PPO learner. The training-time LSTM state persists across
/// rollout windows within an episode.
class RppoAgent {
 public:
  static constexpr const char* kAlgo = "rppo";
  using Carry = RecurrentCarry;

  RppoAgent() = default;
  RppoAgent(const EnvConfig& env_config, PpoHyperparams hp, PolicyArch arch, std::uint64_t seed)
      : hp_(hp), arch_(std::move(arch)), policy_(env_config, arch_) {
    hp_.validate();
    if (hp_.minibatch_size != hp_.n_steps)
      throw ConfigError("recurrent updates consume the whole window: minibatch_size must equal n_steps");
    Rng init(derive_seed(seed, streams::kPolicyInit));
    params_ = policy_.initial_params(init);
    adam_ = nn::AdamState::create(params_.size(), hp_.learning_rate);
    carry_ = initial_carry();
  }

  Carry initial_carry() const {
    return {std::vector<double>(policy_.hidden(), 0.0), std::vector<double>(policy_.hidden(), 0.0)};
  }

  ActResult policy_step(const Observation& obs, bool episode_start, Rng* rng, Carry& carry) const {
    if (episode_start) carry.zero();
    thread_local RecurrentActorCritic::Forward f;
    policy_.forward(params_, obs, carry.h, carry.c, f);
    carry.h = f.lstm.h;
    carry.c = f.lstm.c;
    return select_action(f.out, rng);
  }

  RecurrentRolloutBuffer collect(EnvSession& session, Rng& rng) {
    RecurrentRolloutBuffer buffer;
    buffer.steps.reserve(hp_.n_steps);
    for (std::size_t k = 0; k < hp_.n_steps; ++k) {
      Transition t;
      t.obs = session.observation();
      t.episode_start = session.episode_start();
      if (t.episode_start) carry_.zero();
      buffer.h.push_back(carry_.h);
      buffer.c.push_back(carry_.c);
      const ActResult a = policy_step(t.obs, false, &rng, carry_);
      const auto outcome = session.advance(a.action());
      t.action = a.indices;
      t.log_prob = a.log_prob;
      t.value = a.value;
      t.reward = outcome.reward;
      t.done = outcome.done;
      buffer.steps.push_back(t);
    }
    Carry peek = carry_;
    buffer.last_value = policy_step(session.observation(), session.episode_start(), nullptr, peek).value;
    return buffer;
  }

  LossStats update(RecurrentRolloutBuffer& buffer, Rng& /*rng*/) {
    compute_gae(buffer, hp_.gamma, hp_.gae_lambda);
    std::vector<double> grad(params_.size());
    LossStats sum;
    for (std::size_t e = 0; e < hp_.epochs; ++e) {
      std::fill(grad.begin(), grad.end(), 0.0);
      const LossStats s = rppo_window_loss(policy_, params_, buffer, hp_, grad);
      if (!s.finite()) throw TrainingError("non-finite RPPO loss", loss_diagnostic(s, adam_.t, e));
      nn::clip_grad_norm(grad, hp_.max_grad_norm);
      nn::adam_update(params_, grad, adam_);
      sum += s;
    }
    return sum.scaled(1.0 / static_cast<double>(hp_.epochs));
  }

  const RecurrentActorCritic& policy() const noexcept { return policy_; }
  const std::vector<double>& params() const noexcept { return params_; }
  std::vector<double>& mutable_params() noexcept { return params_; }
  const nn::AdamState& adam() const noexcept { return adam_; }
  nn::AdamState& mutable_adam() noexcept { return adam_; }
  const PpoHyperparams& hyperparams() const noexcept { return hp_; }
  const PolicyArch& arch() const noexcept { return arch_; }
  const Carry& carry() const noexcept { return carry_; }

  friend void to_json(nlohmann::json& j, const RppoAgent& a) {
    j = {{"hyperparams", a.hp_},
         {"arch", a.arch_},
         {"params", a.params_},
         {"adam", PpoAgent::adam_json(a.adam_)},
         {"carry_h", a.carry_.h},
         {"carry_c", a.carry_.c}};
  }

  void load_json(const nlohmann::json& j) {
    hp_ = j.at("hyperparams").get<PpoHyperparams>();
    const auto arch = j.at("arch").get<PolicyArch>();
    if (!(arch == arch_)) throw CheckpointError("checkpoint architecture does not match");
    auto params = j.at("params").get<std::vector<double>>();
    if (params.size() != policy_.param_count()) throw CheckpointError("checkpoint parameter count mismatch");
    params_ = std::move(params);
    adam_ = PpoAgent::adam_from_json(j.at("adam"));
    if (adam_.m.size() != params_.size()) throw CheckpointError("checkpoint optimiser shape mismatch");
    j.at("carry_h").get_to(carry_.h);
    j.at("carry_c").get_to(carry_.c);
    if (carry_.h.size() != policy_.hidden() || carry_.c.size() != policy_.hidden())
      throw CheckpointError("checkpoint hidden state size mismatch");
  }

 private:
  PpoHyperparams hp_ = PpoHyperparams::rppo_defaults();
  PolicyArch arch_{};
  RecurrentActorCritic policy_;
  std::vector<double> params_;
  nn::AdamState adam_;
  Carry carry_;
};

}  // namespace supplyrl::rl

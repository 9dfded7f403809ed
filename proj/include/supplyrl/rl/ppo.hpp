#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "supplyrl/core/errors.hpp"
#include "supplyrl/core/rng.hpp"
#include "supplyrl/nn/adam.hpp"
#include "supplyrl/nn/categorical.hpp"
#include "supplyrl/rl/policy.hpp"
#include "supplyrl/rl/rollout.hpp"
#include "supplyrl/rl/session.hpp"

namespace supplyrl::rl {

struct PpoHyperparams {
  std::size_t n_steps = 2048;
  std::size_t epochs = 10;
  std::size_t minibatch_size = 64;
  double learning_rate = 0.003;
  double clip_range = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double vf_coef = 0.5;
  double entropy_coef = 0.0;
  double max_grad_norm = 0.5;
  bool normalize_advantage = true;
  std::size_t stats_window_size = 100;

  static PpoHyperparams ppo_defaults() { return {}; }

  /// Recurrent variant: 128-step windows consumed as one sequence batch.
  static PpoHyperparams rppo_defaults() {
    PpoHyperparams hp;
    hp.n_steps = 128;
    hp.minibatch_size = 128;
    return hp;
  }

  void validate() const {
    if (n_steps == 0) throw ConfigError("n_steps must be > 0");
    if (epochs == 0) throw ConfigError("epochs must be > 0");
    if (minibatch_size == 0 || minibatch_size > n_steps) throw ConfigError("minibatch_size must lie in [1, n_steps]");
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
    if (!(clip_range > 0.0)) throw ConfigError("clip_range must be > 0");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("gae_lambda must lie in [0, 1]");
    if (!(vf_coef >= 0.0)) throw ConfigError("vf_coef must be >= 0");
    if (!(entropy_coef >= 0.0)) throw ConfigError("entropy_coef must be >= 0");
    if (!(max_grad_norm > 0.0)) throw ConfigError("max_grad_norm must be > 0");
    if (stats_window_size == 0) throw ConfigError("stats_window_size must be > 0");
  }

  friend bool operator==(const PpoHyperparams&, const PpoHyperparams&) = default;
};

inline void to_json(nlohmann::json& j, const PpoHyperparams& h) {
  j = {{"n_steps", h.n_steps},
       {"epochs", h.epochs},
       {"minibatch_size", h.minibatch_size},
       {"learning_rate", h.learning_rate},
       {"clip_range", h.clip_range},
       {"gamma", h.gamma},
       {"gae_lambda", h.gae_lambda},
       {"vf_coef", h.vf_coef},
       {"entropy_coef", h.entropy_coef},
       {"max_grad_norm", h.max_grad_norm},
       {"normalize_advantage", h.normalize_advantage},
       {"stats_window_size", h.stats_window_size}};
}

inline void from_json(const nlohmann::json& j, PpoHyperparams& h) {
  j.at("n_steps").get_to(h.n_steps);
  j.at("epochs").get_to(h.epochs);
  j.at("minibatch_size").get_to(h.minibatch_size);
  j.at("learning_rate").get_to(h.learning_rate);
  j.at("clip_range").get_to(h.clip_range);
  j.at("gamma").get_to(h.gamma);
  j.at("gae_lambda").get_to(h.gae_lambda);
  j.at("vf_coef").get_to(h.vf_coef);
  j.at("entropy_coef").get_to(h.entropy_coef);
  j.at("max_grad_norm").get_to(h.max_grad_norm);
  j.at("normalize_advantage").get_to(h.normalize_advantage);
  j.at("stats_window_size").get_to(h.stats_window_size);
}

inline void to_json(nlohmann::json& j, const PolicyArch& a) {
  j = {{"trunk", a.trunk}, {"lstm_hidden", a.lstm_hidden}};
}
inline void from_json(const nlohmann::json& j, PolicyArch& a) {
  j.at("trunk").get_to(a.trunk);
  j.at("lstm_hidden").get_to(a.lstm_hidden);
}

/// min(r A, clip(r, 1 - eps, 1 + eps) A)
inline double clipped_surrogate(double ratio, double advantage, double epsilon) {
  const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

/// In-place (a - mean) / (std + 1e-8) with the unbiased standard deviation.
/// A single element is only centred.
inline void normalize_advantages(std::span<double> adv) {
  if (adv.empty()) return;
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  for (double& a : adv) a -= mean;
  if (adv.size() < 2) return;
  double sq = 0.0;
  for (double a : adv) sq += a * a;
  const double sd = std::sqrt(sq / (n - 1.0));
  for (double& a : adv) a /= sd + 1e-8;
}

/// Epoch-major minibatch index lists. Each epoch is an independent
/// Fisher-Yates permutation; a trailing partial batch is kept.
inline std::vector<std::vector<std::size_t>> minibatch_schedule(std::size_t n, std::size_t minibatch_size,
                                                                std::size_t epochs, Rng& rng) {
  std::vector<std::vector<std::size_t>> batches;
  std::vector<std::size_t> perm(n);
  for (std::size_t e = 0; e < epochs; ++e) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    for (std::size_t start = 0; start < n; start += minibatch_size)
      batches.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                           perm.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + minibatch_size)));
  }
  return batches;
}

struct LossStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double total_loss = 0.0;

  LossStats& operator+=(const LossStats& o) {
    policy_loss += o.policy_loss;
    value_loss += o.value_loss;
    entropy += o.entropy;
    clip_fraction += o.clip_fraction;
    total_loss += o.total_loss;
    return *this;
  }
  LossStats scaled(double s) const {
    return {policy_loss * s, value_loss * s, entropy * s, clip_fraction * s, total_loss * s};
  }
  bool finite() const {
    return std::isfinite(policy_loss) && std::isfinite(value_loss) && std::isfinite(entropy) &&
           std::isfinite(total_loss);
  }
};

/// Loss contribution of one sample in a batch of size n:
///   -min(r A, clip(r) A) / n + vf_coef (R - V)^2 / n - entropy_coef H / n
/// When `dlogits` is given, head-logit and value gradients are written
/// (dlogits overwritten, not accumulated).
inline LossStats sample_loss(const HeadOutputs& out, const HeadIndices& action, double old_log_prob,
                             double advantage, double target, double inv_n, const PpoHyperparams& hp,
                             std::array<std::vector<double>, kHeads>* dlogits, double* dvalue) {
  const JointStats js = joint_stats(out, action);
  const double ratio = std::exp(js.log_prob - old_log_prob);
  const double surrogate = clipped_surrogate(ratio, advantage, hp.clip_range);
  const double value = out.value[0];
  const double err = value - target;
  LossStats s;
  s.policy_loss = -surrogate * inv_n;
  s.value_loss = err * err * inv_n;
  s.entropy = js.entropy * inv_n;
  s.clip_fraction = std::abs(ratio - 1.0) > hp.clip_range ? inv_n : 0.0;
  s.total_loss = s.policy_loss + hp.vf_coef * s.value_loss - hp.entropy_coef * s.entropy;
  if (dlogits != nullptr) {
    const bool in_band = ratio >= 1.0 - hp.clip_range && ratio <= 1.0 + hp.clip_range;
    const bool unclipped_active = ratio * advantage <= std::clamp(ratio, 1.0 - hp.clip_range, 1.0 + hp.clip_range) * advantage;
    const double dlogp = (unclipped_active || in_band) ? -advantage * ratio * inv_n : 0.0;
    const double dentropy = -hp.entropy_coef * inv_n;
    for (std::size_t k = 0; k < kHeads; ++k) {
      (*dlogits)[k].assign(out.logits[k].size(), 0.0);
      nn::categorical_backward(out.logits[k], static_cast<std::size_t>(action[k]), dlogp, dentropy, (*dlogits)[k]);
    }
    *dvalue = hp.vf_coef * 2.0 * err * inv_n;
  }
  return s;
}

inline std::string loss_diagnostic(const LossStats& s, std::int64_t update, std::size_t batch) {
  std::ostringstream os;
  os << "update=" << update << " minibatch=" << batch << " policy_loss=" << s.policy_loss
     << " value_loss=" << s.value_loss << " entropy=" << s.entropy << " clip_fraction=" << s.clip_fraction
     << " total_loss=" << s.total_loss;
  return os.str();
}

/// Total PPO loss over `indices` of a buffer with computed advantages.
/// Gradients are accumulated into `grad` unless it is empty.
inline LossStats ppo_minibatch_loss(const ActorCritic& policy, std::span<const double> params,
                                    const RolloutBuffer& buffer, std::span<const std::size_t> indices,
                                    const PpoHyperparams& hp, std::span<double> grad) {
  std::vector<double> adv(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) adv[k] = buffer.advantages[indices[k]];
  if (hp.normalize_advantage) normalize_advantages(adv);
  const double inv_n = 1.0 / static_cast<double>(indices.size());
  const bool want_grad = !grad.empty();
  ActorCritic::Forward f;
  std::array<std::vector<double>, kHeads> dlogits;
  double dvalue = 0.0;
  LossStats total;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const Transition& t = buffer.steps[indices[k]];
    policy.forward(params, t.obs, f);
    total += sample_loss(f.out, t.action, t.log_prob, adv[k], buffer.returns[indices[k]], inv_n, hp,
                         want_grad ? &dlogits : nullptr, &dvalue);
    if (want_grad) policy.backward(params, f, dlogits, dvalue, grad);
  }
  return total;
}

/// pi_theta(a|s) / pi_theta_old(a|s) for every stored transition.
inline std::vector<double> ppo_ratios(const ActorCritic& policy, std::span<const double> params,
                                      const RolloutBuffer& buffer) {
  std::vector<double> ratios;
  ActorCritic::Forward f;
  for (const auto& t : buffer.steps) {
    policy.forward(params, t.obs, f);
    ratios.push_back(std::exp(joint_stats(f.out, t.action).log_prob - t.log_prob));
  }
  return ratios;
}

/// Feed-forward PPO learner: policy parameters, optimiser state and
/// hyperparameters.
class PpoAgent {
 public:
  static constexpr const char* kAlgo = "ppo";
  struct Carry {};  // no recurrent state

  PpoAgent() = default;
  PpoAgent(const EnvConfig& env_config, PpoHyperparams hp, PolicyArch arch, std::uint64_t seed)
      : hp_(hp), arch_(std::move(arch)), policy_(env_config, arch_) {
    hp_.validate();
    Rng init(derive_seed(seed, streams::kPolicyInit));
    params_ = policy_.initial_params(init);
    adam_ = nn::AdamState::create(params_.size(), hp_.learning_rate);
  }

  Carry initial_carry() const { return {}; }

  /// rng == nullptr selects the greedy action.
  ActResult policy_step(const Observation& obs, bool /*episode_start*/, Rng* rng, Carry& /*carry*/) const {
    return policy_.act(params_, obs, rng);
  }

  RolloutBuffer collect(EnvSession& session, Rng& rng) {
    RolloutBuffer buffer;
    buffer.steps.reserve(hp_.n_steps);
    for (std::size_t k = 0; k < hp_.n_steps; ++k) {
      Transition t;
      t.obs = session.observation();
      t.episode_start = session.episode_start();
      const ActResult a = policy_.act(params_, t.obs, &rng);
      const auto outcome = session.advance(a.action());
      t.action = a.indices;
      t.log_prob = a.log_prob;
      t.value = a.value;
      t.reward = outcome.reward;
      t.done = outcome.done;
      buffer.steps.push_back(t);
    }
    buffer.last_value = policy_.act(params_, session.observation(), nullptr).value;
    return buffer;
  }

  LossStats update(RolloutBuffer& buffer, Rng& rng) {
    compute_gae(buffer, hp_.gamma, hp_.gae_lambda);
    const auto batches = minibatch_schedule(buffer.size(), hp_.minibatch_size, hp_.epochs, rng);
    std::vector<double> grad(params_.size());
    LossStats sum;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      std::fill(grad.begin(), grad.end(), 0.0);
      const LossStats s = ppo_minibatch_loss(policy_, params_, buffer, batches[b], hp_, grad);
      if (!s.finite()) throw TrainingError("non-finite PPO loss", loss_diagnostic(s, adam_.t, b));
      nn::clip_grad_norm(grad, hp_.max_grad_norm);
      nn::adam_update(params_, grad, adam_);
      sum += s;
    }
    return sum.scaled(1.0 / static_cast<double>(batches.size()));
  }

  const ActorCritic& policy() const noexcept { return policy_; }
  const std::vector<double>& params() const noexcept { return params_; }
  std::vector<double>& mutable_params() noexcept { return params_; }
  const nn::AdamState& adam() const noexcept { return adam_; }
  nn::AdamState& mutable_adam() noexcept { return adam_; }
  const PpoHyperparams& hyperparams() const noexcept { return hp_; }
  const PolicyArch& arch() const noexcept { return arch_; }

  friend void to_json(nlohmann::json& j, const PpoAgent& a) {
    j = {{"hyperparams", a.hp_}, {"arch", a.arch_}, {"params", a.params_}, {"adam", adam_json(a.adam_)}};
  }

  /// Restores into an agent constructed with the same environment config.
  void load_json(const nlohmann::json& j) {
    hp_ = j.at("hyperparams").get<PpoHyperparams>();
    const auto arch = j.at("arch").get<PolicyArch>();
    if (!(arch == arch_)) throw CheckpointError("checkpoint architecture does not match");
    auto params = j.at("params").get<std::vector<double>>();
    if (params.size() != policy_.param_count()) throw CheckpointError("checkpoint parameter count mismatch");
    params_ = std::move(params);
    adam_ = adam_from_json(j.at("adam"));
    if (adam_.m.size() != params_.size()) throw CheckpointError("checkpoint optimiser shape mismatch");
  }

  static nlohmann::json adam_json(const nn::AdamState& s) {
    return {{"m", s.m}, {"v", s.v}, {"t", s.t}, {"learning_rate", s.learning_rate},
            {"beta1", s.beta1}, {"beta2", s.beta2}, {"epsilon", s.epsilon}};
  }
  static nn::AdamState adam_from_json(const nlohmann::json& j) {
    nn::AdamState s;
    j.at("m").get_to(s.m);
    j.at("v").get_to(s.v);
    j.at("t").get_to(s.t);
    j.at("learning_rate").get_to(s.learning_rate);
    j.at("beta1").get_to(s.beta1);
    j.at("beta2").get_to(s.beta2);
    j.at("epsilon").get_to(s.epsilon);
    if (s.v.size() != s.m.size()) throw CheckpointError("optimiser moment size mismatch");
    return s;
  }

 private:
  PpoHyperparams hp_{};
  PolicyArch arch_{};
  ActorCritic policy_;
  std::vector<double> params_;
  nn::AdamState adam_;
};

}  // namespace supplyrl::rl

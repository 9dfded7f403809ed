#include <gtest/gtest.h>

#include <cmath>

#include "supplyrl/nn/grad_check.hpp"
#include "supplyrl/rl/rppo.hpp"
#include "supplyrl/rl/trainer.hpp"

using namespace supplyrl;
using namespace supplyrl::rl;

namespace {

PpoHyperparams window_hp(std::size_t n_steps) {
  auto hp = PpoHyperparams::rppo_defaults();
  hp.n_steps = n_steps;
  hp.minibatch_size = n_steps;
  hp.epochs = 2;
  return hp;
}

PolicyArch small_arch() { return PolicyArch{{16}, 8}; }

EnvSession make_session(const char* task = "Sto1", std::uint64_t seed = 1) {
  return EnvSession(EnvConfig{}, {task}, kNoPhaseSwitch, seed, 100);
}

bool all_zero(const std::vector<double>& v) {
  for (double x : v)
    if (x != 0.0) return false;
  return true;
}

}  // namespace

TEST(Rppo, Defaults) {
  const auto hp = PpoHyperparams::rppo_defaults();
  EXPECT_EQ(hp.n_steps, 128u);
  EXPECT_EQ(hp.minibatch_size, 128u);
  EXPECT_EQ(hp.learning_rate, 0.003);
  const RecurrentActorCritic policy(EnvConfig{}, PolicyArch{});
  EXPECT_EQ(policy.hidden(), 64u);
  EXPECT_EQ(policy.param_count(),
            (10 * 64 + 64) + 4 * 64 * (64 + 64 + 1) + 64 * (11 + 31 + 31 + 11 + 1) + (11 + 31 + 31 + 11 + 1));
}

TEST(Rppo, MinibatchMustCoverTheWindow) {
  auto hp = PpoHyperparams::rppo_defaults();
  hp.minibatch_size = 64;
  EXPECT_THROW(RppoAgent(EnvConfig{}, hp, PolicyArch{}, 1), ConfigError);
}

TEST(Rppo, StoredStatesFollowTheRollout) {
  RppoAgent agent(EnvConfig{}, window_hp(64), small_arch(), 3);
  auto session = make_session("Sto0", 3);
  Rng rng(4);
  const auto buffer = agent.collect(session, rng);
  ASSERT_EQ(buffer.h.size(), 64u);
  RecurrentActorCritic::Forward f;
  int starts = 0;
  for (std::size_t t = 0; t < buffer.size(); ++t) {
    if (buffer.steps[t].episode_start) {
      ++starts;
      EXPECT_TRUE(all_zero(buffer.h[t]) && all_zero(buffer.c[t])) << "t=" << t;
    }
    if (t + 1 < buffer.size() && !buffer.steps[t + 1].episode_start) {
      agent.policy().forward(agent.params(), buffer.steps[t].obs, buffer.h[t], buffer.c[t], f);
      EXPECT_EQ(f.lstm.h, buffer.h[t + 1]);
      EXPECT_EQ(f.lstm.c, buffer.c[t + 1]);
    }
  }
  EXPECT_GE(starts, 2);  // all-random Sto0 episodes are short
}

TEST(Rppo, HiddenStatePersistsAcrossWindows) {
  RppoAgent agent(EnvConfig{}, window_hp(5), small_arch(), 3);
  auto session = make_session("Sto0", 3);
  Rng rng(4);
  const auto first = agent.collect(session, rng);
  ASSERT_FALSE(session.episode_start());  // 5 steps cannot finish an episode here
  const auto carry = agent.carry();
  EXPECT_FALSE(all_zero(carry.h));
  const auto second = agent.collect(session, rng);
  EXPECT_EQ(second.h[0], carry.h);
  EXPECT_EQ(second.c[0], carry.c);
  EXPECT_FALSE(second.steps[0].episode_start);
}

TEST(Rppo, FirstPassRatiosAreOne) {
  RppoAgent agent(EnvConfig{}, window_hp(128), PolicyArch{}, 5);
  auto session = make_session("Sto1", 5);
  Rng rng(6);
  for (int window = 0; window < 3; ++window) {
    auto buffer = agent.collect(session, rng);
    const auto lp = rppo_replay_log_probs(agent.policy(), agent.params(), buffer);
    for (std::size_t t = 0; t < buffer.size(); ++t) ASSERT_NEAR(std::exp(lp[t] - buffer.steps[t].log_prob), 1.0, 1e-12);
    agent.update(buffer, rng);
  }
}

TEST(Rppo, WindowLossGradientMatchesFiniteDifferences) {
  auto hp = window_hp(8);
  hp.entropy_coef = 0.01;
  RppoAgent agent(EnvConfig{}, hp, PolicyArch{}, 8);
  auto session = make_session("Sto0", 8);
  Rng rng(9);
  agent.collect(session, rng);  // non-zero carried state for the window below
  auto buffer = agent.collect(session, rng);
  const double shifts[] = {0.05, -0.6, -0.05, 0.6};
  for (std::size_t t = 0; t < buffer.size(); ++t) {
    buffer.steps[t].reward *= 1e-6;
    buffer.steps[t].log_prob += shifts[t % 4];
  }
  compute_gae(buffer, hp.gamma, hp.gae_lambda);
  auto params = agent.params();
  std::vector<double> grad(params.size(), 0.0);
  rppo_window_loss(agent.policy(), params, buffer, hp, grad);
  const auto r = nn::grad_check(
      [&](std::span<const double> p) { return rppo_window_loss(agent.policy(), p, buffer, hp, {}).total_loss; },
      params, grad);
  EXPECT_LT(r.max_relative_error, 1e-4) << "index " << r.worst_index << " analytic " << r.analytic_at_worst
                                        << " numeric " << r.numeric_at_worst;
}

TEST(Rppo, StepsAfterAnEpisodeStartIgnoreEarlierInputs) {
  auto hp = window_hp(6);
  RppoAgent agent(EnvConfig{}, hp, small_arch(), 2);
  auto session = make_session("Sto0", 2);
  Rng rng(3);
  auto buffer = agent.collect(session, rng);
  for (auto& s : buffer.steps) s.episode_start = false;
  buffer.steps[3].episode_start = true;
  std::fill(buffer.h[3].begin(), buffer.h[3].end(), 0.0);
  std::fill(buffer.c[3].begin(), buffer.c[3].end(), 0.0);
  compute_gae(buffer, hp.gamma, hp.gae_lambda);
  hp.normalize_advantage = false;
  const double base = rppo_window_loss(agent.policy(), agent.params(), buffer, hp, {}).total_loss;

  auto later_only = [&](const RecurrentRolloutBuffer& b) {
    RecurrentRolloutBuffer tail;
    for (std::size_t t = 3; t < b.size(); ++t) {
      tail.steps.push_back(b.steps[t]);
      tail.h.push_back(b.h[t]);
      tail.c.push_back(b.c[t]);
      tail.advantages.push_back(b.advantages[t]);
      tail.returns.push_back(b.returns[t]);
    }
    return rppo_window_loss(agent.policy(), agent.params(), tail, hp, {}).total_loss;
  };
  auto perturbed = buffer;
  perturbed.steps[1].obs[0] += 5.0;
  EXPECT_EQ(later_only(perturbed), later_only(buffer));
  EXPECT_NE(rppo_window_loss(agent.policy(), agent.params(), perturbed, hp, {}).total_loss, base);
}

TEST(Rppo, BypassedMemoryMakesStoredStateIrrelevant) {
  // U = 0, zero input weights on the forget gate and a very negative forget
  // bias turn the LSTM into a per-step feed-forward map.
  RppoAgent agent(EnvConfig{}, window_hp(32), small_arch(), 4);
  auto& p = agent.mutable_params();
  const auto& cell = agent.policy().lstm();
  const std::size_t H = cell.hidden, I = cell.input;
  for (std::size_t k = 0; k < 4 * H * H; ++k) p[cell.u_offset() + k] = 0.0;
  for (std::size_t r = H; r < 2 * H; ++r) {
    for (std::size_t k = 0; k < I; ++k) p[cell.w_offset() + r * I + k] = 0.0;
    p[cell.b_offset() + r] = -1000.0;
  }
  auto session = make_session("Sto1", 4);
  Rng rng(5);
  auto buffer = agent.collect(session, rng);
  auto zeroed = buffer;
  for (auto& h : zeroed.h) std::fill(h.begin(), h.end(), 0.0);
  for (auto& c : zeroed.c) std::fill(c.begin(), c.end(), 0.0);
  EXPECT_EQ(rppo_replay_log_probs(agent.policy(), agent.params(), buffer),
            rppo_replay_log_probs(agent.policy(), agent.params(), zeroed));
}

TEST(Rppo, ZeroLearningRateKeepsParameters) {
  auto hp = window_hp(32);
  hp.learning_rate = 0.0;
  RppoAgent agent(EnvConfig{}, hp, small_arch(), 1);
  const auto before = agent.params();
  auto session = make_session();
  Rng rng(1);
  auto buffer = agent.collect(session, rng);
  agent.update(buffer, rng);
  EXPECT_EQ(agent.params(), before);
  EXPECT_EQ(agent.adam().t, 2);
}

TEST(Rppo, GreedyPolicyStepIsDeterministic) {
  RppoAgent agent(EnvConfig{}, window_hp(32), small_arch(), 1);
  auto a = agent.initial_carry(), b = agent.initial_carry();
  const Observation obs{10, 0, 0, 2, 0, 0, 0, 3, 1, 0};
  for (int k = 0; k < 5; ++k) {
    const auto x = agent.policy_step(obs, k == 0, nullptr, a);
    const auto y = agent.policy_step(obs, k == 0, nullptr, b);
    EXPECT_EQ(x.indices, y.indices);
    EXPECT_EQ(x.log_prob, y.log_prob);
  }
  EXPECT_EQ(a, b);
  agent.policy_step(obs, true, nullptr, a);
  auto fresh = agent.initial_carry();
  agent.policy_step(obs, false, nullptr, fresh);
  EXPECT_EQ(a, fresh);
}

TEST(Rppo, TrainerResumeIsBitExact) {
  const auto hp = window_hp(32);
  auto full = Trainer<RppoAgent>(EnvConfig{}, {"Bat3"}, kNoPhaseSwitch, hp, small_arch(), 9);
  full.run(320);
  auto half = Trainer<RppoAgent>(EnvConfig{}, {"Bat3"}, kNoPhaseSwitch, hp, small_arch(), 9);
  half.run(160);
  auto resumed = Trainer<RppoAgent>::from_json(nlohmann::json::parse(half.to_json().dump()));
  EXPECT_EQ(resumed.agent().carry(), half.agent().carry());
  resumed.run(320);
  EXPECT_EQ(resumed.curve(), full.curve());
  EXPECT_EQ(resumed.to_json().dump(), full.to_json().dump());
}

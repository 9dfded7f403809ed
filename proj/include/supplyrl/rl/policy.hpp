#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "supplyrl/core/rng.hpp"
#include "supplyrl/env.hpp"
#include "supplyrl/nn/categorical.hpp"
#include "supplyrl/nn/dense.hpp"
#include "supplyrl/nn/lstm.hpp"

namespace supplyrl::rl {

/// Action components in head order: Q_0, Q_1, Q_2, R_0.
inline constexpr std::size_t kHeads = 4;
using HeadIndices = std::array<int, kHeads>;

inline std::array<std::size_t, kHeads> head_sizes(const EnvConfig& config) {
  return {static_cast<std::size_t>(config.max_order[kRetailer] + 1),
          static_cast<std::size_t>(config.max_order[kWarehouse] + 1),
          static_cast<std::size_t>(config.max_order[kFactory] + 1),
          static_cast<std::size_t>(config.reorder_point_max + 1)};
}

inline ActionVector to_action(const HeadIndices& idx) {
  return ActionVector{{idx[0], idx[1], idx[2]}, idx[3]};
}

inline HeadIndices to_indices(const ActionVector& a) {
  return {a.order[0], a.order[1], a.order[2], a.reorder_point};
}

struct HeadOutputs {
  std::array<std::vector<double>, kHeads> logits;
  std::array<double, 1> value{};
};

/// Four linear categorical heads and a scalar value head over a shared
/// feature vector.
struct ActionHeads {
  std::array<nn::DenseLayer, kHeads> policy;
  nn::DenseLayer value;

  static ActionHeads create(nn::ParamLayout& layout, std::size_t features,
                            const std::array<std::size_t, kHeads>& sizes) {
    ActionHeads heads;
    for (std::size_t k = 0; k < kHeads; ++k)
      heads.policy[k] = nn::DenseLayer::create(layout, features, sizes[k], nn::Activation::kIdentity);
    heads.value = nn::DenseLayer::create(layout, features, 1, nn::Activation::kIdentity);
    return heads;
  }

  void forward(std::span<const double> params, std::span<const double> features, HeadOutputs& out) const {
    for (std::size_t k = 0; k < kHeads; ++k) {
      out.logits[k].resize(policy[k].out);
      policy[k].forward(params, features, out.logits[k]);
    }
    value.forward(params, features, out.value);
  }

  /// Accumulates parameter gradients and adds dL/dfeatures into `dfeatures`.
  void backward(std::span<const double> params, std::span<const double> features, const HeadOutputs& out,
                const std::array<std::vector<double>, kHeads>& dlogits, double dvalue,
                std::span<double> grad, std::span<double> dfeatures) const {
    thread_local std::vector<double> dx;
    dx.resize(features.size());
    for (std::size_t k = 0; k < kHeads; ++k) {
      policy[k].backward(params, features, out.logits[k], dlogits[k], grad, dx);
      for (std::size_t j = 0; j < dx.size(); ++j) dfeatures[j] += dx[j];
    }
    const std::array<double, 1> dv{dvalue};
    value.backward(params, features, out.value, dv, grad, dx);
    for (std::size_t j = 0; j < dx.size(); ++j) dfeatures[j] += dx[j];
  }

  void initialize(std::span<double> params, Rng& rng) const {
    for (const auto& p : policy) p.initialize(params, rng);
    value.initialize(params, rng);
  }
};

struct ActResult {
  HeadIndices indices{};
  double log_prob = 0.0;
  double value = 0.0;
  ActionVector action() const { return to_action(indices); }
};

/// Samples every head independently (or takes the argmax); the joint
/// log-probability is the sum over heads.
inline ActResult select_action(const HeadOutputs& out, Rng* rng) {
  ActResult r;
  for (std::size_t k = 0; k < kHeads; ++k) {
    if (rng != nullptr) {
      const auto [idx, lp] = nn::categorical_sample(out.logits[k], *rng);
      r.indices[k] = static_cast<int>(idx);
      r.log_prob += lp;
    } else {
      const std::size_t idx = nn::categorical_argmax(out.logits[k]);
      r.indices[k] = static_cast<int>(idx);
      r.log_prob += nn::categorical_stats(out.logits[k], idx).log_prob;
    }
  }
  r.value = out.value[0];
  return r;
}

struct JointStats {
  double log_prob = 0.0;
  double entropy = 0.0;
};

inline JointStats joint_stats(const HeadOutputs& out, const HeadIndices& idx) {
  JointStats s;
  for (std::size_t k = 0; k < kHeads; ++k) {
    const auto hs = nn::categorical_stats(out.logits[k], static_cast<std::size_t>(idx[k]));
    s.log_prob += hs.log_prob;
    s.entropy += hs.entropy;
  }
  return s;
}

/// Feed-forward actor-critic: shared tanh trunk feeding the heads.
struct PolicyArch {
  std::vector<std::size_t> trunk{64, 64};
  std::size_t lstm_hidden = 64;

  friend bool operator==(const PolicyArch&, const PolicyArch&) = default;
};

class ActorCritic {
 public:
  struct Forward {
    nn::MlpCache trunk;
    HeadOutputs out;
  };

  ActorCritic() = default;
  ActorCritic(const EnvConfig& config, const PolicyArch& arch) {
    nn::ParamLayout layout;
    trunk_ = nn::Mlp::create(layout, kObservationSize, arch.trunk, nn::Activation::kTanh, nn::Activation::kTanh);
    heads_ = ActionHeads::create(layout, trunk_.out(), head_sizes(config));
    n_params_ = layout.size();
  }

  std::size_t param_count() const noexcept { return n_params_; }

  std::vector<double> initial_params(Rng& rng) const {
    std::vector<double> p(n_params_);
    trunk_.initialize(p, rng);
    heads_.initialize(p, rng);
    return p;
  }

  void forward(std::span<const double> params, const Observation& obs, Forward& f) const {
    const auto features = trunk_.forward(params, obs, f.trunk);
    heads_.forward(params, features, f.out);
  }

  ActResult act(std::span<const double> params, const Observation& obs, Rng* rng) const {
    thread_local Forward f;
    forward(params, obs, f);
    return select_action(f.out, rng);
  }

  void backward(std::span<const double> params, const Forward& f,
                const std::array<std::vector<double>, kHeads>& dlogits, double dvalue,
                std::span<double> grad) const {
    thread_local std::vector<double> dfeat;
    dfeat.assign(trunk_.out(), 0.0);
    heads_.backward(params, f.trunk.output(), f.out, dlogits, dvalue, grad, dfeat);
    trunk_.backward(params, f.trunk, dfeat, grad);
  }

  const nn::Mlp& trunk() const noexcept { return trunk_; }
  const ActionHeads& heads() const noexcept { return heads_; }

 private:
  nn::Mlp trunk_;
  ActionHeads heads_;
  std::size_t n_params_ = 0;
};

/// Recurrent actor-critic: tanh input projection, one LSTM layer, heads on
/// the LSTM output.
class RecurrentActorCritic {
 public:
  struct Forward {
    std::vector<double> projected;
    nn::LstmCache lstm;
    HeadOutputs out;
  };

  RecurrentActorCritic() = default;
  RecurrentActorCritic(const EnvConfig& config, const PolicyArch& arch) {
    nn::ParamLayout layout;
    const std::size_t width = arch.trunk.empty() ? arch.lstm_hidden : arch.trunk.front();
    projection_ = nn::DenseLayer::create(layout, kObservationSize, width, nn::Activation::kTanh);
    lstm_ = nn::LstmCell::create(layout, width, arch.lstm_hidden);
    heads_ = ActionHeads::create(layout, arch.lstm_hidden, head_sizes(config));
    n_params_ = layout.size();
  }

  std::size_t param_count() const noexcept { return n_params_; }
  std::size_t hidden() const noexcept { return lstm_.hidden; }

  std::vector<double> initial_params(Rng& rng) const {
    std::vector<double> p(n_params_);
    projection_.initialize(p, rng);
    lstm_.initialize(p, rng);
    heads_.initialize(p, rng);
    return p;
  }

  /// One step from (h, c); the new state is f.lstm.h / f.lstm.c.
  void forward(std::span<const double> params, const Observation& obs, std::span<const double> h,
               std::span<const double> c, Forward& f) const {
    f.projected.resize(projection_.out);
    projection_.forward(params, obs, f.projected);
    lstm_.step(params, f.projected, h, c, f.lstm);
    heads_.forward(params, f.lstm.h, f.out);
  }

  const nn::DenseLayer& projection() const noexcept { return projection_; }
  const nn::LstmCell& lstm() const noexcept { return lstm_; }
  const ActionHeads& heads() const noexcept { return heads_; }

 private:
  nn::DenseLayer projection_;
  nn::LstmCell lstm_;
  ActionHeads heads_;
  std::size_t n_params_ = 0;
};

}  // namespace supplyrl::rl

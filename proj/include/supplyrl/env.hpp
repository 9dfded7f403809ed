#pragma once

#include <algorithm>
#include <array>
#include <climits>
#include <cstdint>
#include <vector>

#include "supplyrl/core/errors.hpp"
#include "supplyrl/demand.hpp"

namespace supplyrl {

// Echelon indices: stock flows factory -> warehouse -> retailer.
inline constexpr int kRetailer = 0;
inline constexpr int kWarehouse = 1;
inline constexpr int kFactory = 2;
inline constexpr int kEchelons = 3;

inline constexpr std::size_t kObservationSize = 10;
using Observation = std::array<double, kObservationSize>;
using Inventories = std::array<int, kEchelons>;

struct EnvConfig {
  Inventories capacity{30, 30, 30};
  std::array<double, kEchelons> holding_cost{1000.0, 5.0, 1000.0};
  double stockout_cost = 10000.0;
  int processing_time_warehouse = 3;  // warehouse -> retailer hold
  int processing_time_factory = 1;    // factory -> warehouse hold
  int service_time = 0;
  int max_days = 30;
  int max_stockouts = 3;
  Inventories initial_inventory{10, 0, 0};
  Inventories max_order{10, 30, 30};
  int reorder_point_max = 10;
  // When set, any pipeline entry (not only retailer-bound ones) blocks the
  // order trigger.
  bool system_wide_transit_gate = false;

  void validate() const {
    for (int i = 0; i < kEchelons; ++i) {
      if (capacity[i] <= 0) throw ConfigError("capacity must be > 0");
      if (holding_cost[i] < 0.0) throw ConfigError("holding cost must be >= 0");
      if (max_order[i] < 0 || max_order[i] > capacity[i])
        throw ConfigError("max_order must lie in [0, capacity]");
      if (initial_inventory[i] < 0 || initial_inventory[i] > capacity[i])
        throw ConfigError("initial inventory must lie in [0, capacity]");
    }
    if (stockout_cost < 0.0) throw ConfigError("stockout cost must be >= 0");
    if (max_days <= 0) throw ConfigError("max_days must be > 0");
    if (max_stockouts < 0) throw ConfigError("max_stockouts must be >= 0");
    if (reorder_point_max < 0) throw ConfigError("reorder_point_max must be >= 0");
    if (processing_time_warehouse < 0 || processing_time_factory < 0 || service_time < 0)
      throw ConfigError("processing and service times must be >= 0");
  }

  friend bool operator==(const EnvConfig&, const EnvConfig&) = default;
};

/// Goods travelling to `destination`, received during the step that ends on
/// `arrival_day`.
struct PipelineEntry {
  int destination = 0;
  int quantity = 0;
  int arrival_day = 0;

  friend bool operator==(const PipelineEntry&, const PipelineEntry&) = default;
};

/// Per-echelon order quantities plus the retailer reorder point.
struct ActionVector {
  std::array<int, kEchelons> order{};
  int reorder_point = 0;

  friend bool operator==(const ActionVector&, const ActionVector&) = default;
};

struct EnvState {
  int day = 0;
  Inventories inventory{};
  std::vector<PipelineEntry> pipeline;
  int stockout_count = 0;
  int last_demand = 0;
  int reorder_point = 0;
  bool done = false;

  int in_transit(int echelon) const {
    int total = 0;
    for (const auto& e : pipeline)
      if (e.destination == echelon) total += e.quantity;
    return total;
  }

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct StepInfo {
  int demand = 0;
  int sold = 0;
  int unmet_demand = 0;
  int stockout_count = 0;
  bool orders_placed = false;
  std::array<int, kEchelons> shipped{};   // quantity released by each order
  std::array<int, kEchelons> arrivals{};  // accepted pipeline arrivals
  std::array<int, kEchelons> overflow{};  // arrivals discarded at capacity
  int production = 0;                     // factory raw-material intake (== shipped[kFactory])
};

struct StepResult {
  Observation observation{};
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

/// Per-step cost terms, kept separate so the simulator can charge the
/// stockout term on the unmet quantity and holding on end-of-step stock.
inline double holding_cost(const Inventories& inventory, const EnvConfig& config) {
  double cost = 0.0;
  for (int i = 0; i < kEchelons; ++i)
    cost += config.holding_cost[i] * std::min(inventory[i], config.capacity[i]);
  return cost;
}

inline double stockout_penalty(int unmet, const EnvConfig& config) {
  return config.stockout_cost * std::max(unmet, 0);
}

/// r = -Sc * max(D - I_0, 0) - sum_i Hc_i * min(I_i, C_i)
inline double compute_reward(const Inventories& inventory, int demand, const EnvConfig& config) {
  return -stockout_penalty(demand - inventory[kRetailer], config) - holding_cost(inventory, config);
}

/// Ordering fires when the retailer is below its reorder point and nothing
/// is on the way to it (anywhere in the chain, with the system-wide gate).
inline bool is_order_triggered(const EnvState& state, bool system_wide = false) {
  if (state.inventory[kRetailer] >= state.reorder_point) return false;
  for (const auto& e : state.pipeline)
    if (system_wide || e.destination == kRetailer) return false;
  return true;
}

inline int clip_order(int requested, int upstream_available, int headroom) {
  return std::max(0, std::min({requested, upstream_available, headroom}));
}

inline Observation observation_vector(const EnvState& state, const EnvConfig& config) {
  return {static_cast<double>(state.inventory[kRetailer]),
          static_cast<double>(state.inventory[kWarehouse]),
          static_cast<double>(state.inventory[kFactory]),
          static_cast<double>(state.last_demand),
          static_cast<double>(state.in_transit(kRetailer)),
          static_cast<double>(state.in_transit(kWarehouse)),
          static_cast<double>(state.in_transit(kFactory)),
          static_cast<double>(config.processing_time_warehouse),
          static_cast<double>(config.processing_time_factory),
          static_cast<double>(config.service_time)};
}

/// Clamps each action component into its discrete range.
inline ActionVector clamp_action(ActionVector a, const EnvConfig& config) {
  for (int i = 0; i < kEchelons; ++i) a.order[i] = std::clamp(a.order[i], 0, config.max_order[i]);
  a.reorder_point = std::clamp(a.reorder_point, 0, config.reorder_point_max);
  return a;
}

/// Pull-based three-echelon inventory simulator.
///
/// A step runs these phases in order:
///   1. arrivals due by day+1 enter their destination, capped at capacity
///      (excess is discarded and reported as overflow);
///   2. customer demand is drawn and served from retailer stock, unmet
///      demand is lost and counts one stockout;
///   3. the reorder point is updated; if the order trigger fires, the
///      retailer, warehouse and factory orders are clipped and released in
///      that order (factory production is immediate, from an unlimited
///      raw-material source);
///   4. reward = -(stockout cost on unmet units + holding on end-of-step stock);
///   5. the day advances; the episode ends after more than `max_stockouts`
///      stockouts or once day exceeds `max_days`.
class SupplyChainEnv {
 public:
  SupplyChainEnv() = default;
  SupplyChainEnv(EnvConfig config, DemandConfig task, std::uint64_t seed) : config_(config) {
    config_.validate();
    reset(task, seed);
  }

  /// Reseeds the demand stream and starts a new episode.
  Observation reset(DemandConfig task, std::uint64_t seed) {
    demand_ = DemandStream(task, seed);
    return reset();
  }

  /// Starts a new episode, continuing the current demand stream.
  Observation reset() {
    state_ = EnvState{};
    state_.inventory = config_.initial_inventory;
    return observation_vector(state_, config_);
  }

  /// Swaps the demand regime without touching inventory state.
  void set_task(DemandConfig task, std::uint64_t seed) { demand_ = DemandStream(task, seed); }

  StepResult step(const ActionVector& requested) {
    if (state_.done) throw UsageError("step() called on a finished episode; call reset()");
    const ActionVector action = clamp_action(requested, config_);
    StepResult result;
    StepInfo& info = result.info;
    auto& inv = state_.inventory;

    // 1. arrivals
    const int next_day = state_.day + 1;
    auto due = [&](const PipelineEntry& e) { return e.arrival_day <= next_day; };
    for (const auto& e : state_.pipeline) {
      if (!due(e)) continue;
      const int accepted = std::min(e.quantity, config_.capacity[e.destination] - inv[e.destination]);
      inv[e.destination] += accepted;
      info.arrivals[e.destination] += accepted;
      info.overflow[e.destination] += e.quantity - accepted;
    }
    std::erase_if(state_.pipeline, due);

    // 2. demand
    const int demand = demand_.next();
    const int sold = std::min(demand, inv[kRetailer]);
    inv[kRetailer] -= sold;
    const int unmet = demand - sold;
    if (unmet > 0) ++state_.stockout_count;
    state_.last_demand = demand;
    info.demand = demand;
    info.sold = sold;
    info.unmet_demand = unmet;

    // 3. ordering
    state_.reorder_point = action.reorder_point;
    info.orders_placed = is_order_triggered(state_, config_.system_wide_transit_gate);
    if (info.orders_placed) {
      auto headroom = [&](int i) {
        return std::max(0, config_.capacity[i] - inv[i] - state_.in_transit(i));
      };
      const int to_retailer = clip_order(action.order[kRetailer], inv[kWarehouse], headroom(kRetailer));
      if (to_retailer > 0) {
        inv[kWarehouse] -= to_retailer;
        state_.pipeline.push_back(
            {kRetailer, to_retailer,
             next_day + config_.processing_time_warehouse + config_.service_time});
      }
      const int to_warehouse = clip_order(action.order[kWarehouse], inv[kFactory], headroom(kWarehouse));
      if (to_warehouse > 0) {
        inv[kFactory] -= to_warehouse;
        state_.pipeline.push_back(
            {kWarehouse, to_warehouse, next_day + config_.processing_time_factory});
      }
      const int produced = clip_order(action.order[kFactory], INT_MAX, headroom(kFactory));
      inv[kFactory] += produced;
      info.shipped = {to_retailer, to_warehouse, produced};
      info.production = produced;
    }

    // 4. reward
    result.reward = -(stockout_penalty(unmet, config_) + holding_cost(inv, config_));

    // 5. advance
    state_.day = next_day;
    state_.done = state_.stockout_count > config_.max_stockouts || state_.day > config_.max_days;
    info.stockout_count = state_.stockout_count;
    result.done = state_.done;
    result.observation = observation_vector(state_, config_);
    return result;
  }

  Observation observation() const { return observation_vector(state_, config_); }
  const EnvState& state() const noexcept { return state_; }
  const EnvConfig& config() const noexcept { return config_; }
  const DemandStream& demand_stream() const noexcept { return demand_; }

  /// Restores a full simulator snapshot (checkpoint loading).
  void restore(EnvConfig config, DemandStream demand, EnvState state) {
    config.validate();
    config_ = config;
    demand_ = std::move(demand);
    state_ = std::move(state);
  }

  friend bool operator==(const SupplyChainEnv&, const SupplyChainEnv&) = default;

 private:
  EnvConfig config_{};
  DemandStream demand_{};
  EnvState state_{};
};

}  // namespace supplyrl

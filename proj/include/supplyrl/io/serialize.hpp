#pragma once

#include <string>

#include <json.hpp>

#include "supplyrl/core/errors.hpp"
#include "supplyrl/demand.hpp"
#include "supplyrl/env.hpp"

// JSON mappings for simulator types. Doubles are written with 17
// significant digits by the JSON library, so round trips are exact.

namespace supplyrl {

inline void to_json(nlohmann::json& j, const DemandConfig& c) {
  j = {{"mean", c.mean}, {"std", c.std}, {"batch_size", c.batch_size}};
}
inline void from_json(const nlohmann::json& j, DemandConfig& c) {
  j.at("mean").get_to(c.mean);
  j.at("std").get_to(c.std);
  j.at("batch_size").get_to(c.batch_size);
}

inline void to_json(nlohmann::json& j, const EnvConfig& c) {
  j = {{"capacity", c.capacity},
       {"holding_cost", c.holding_cost},
       {"stockout_cost", c.stockout_cost},
       {"processing_time_warehouse", c.processing_time_warehouse},
       {"processing_time_factory", c.processing_time_factory},
       {"service_time", c.service_time},
       {"max_days", c.max_days},
       {"max_stockouts", c.max_stockouts},
       {"initial_inventory", c.initial_inventory},
       {"max_order", c.max_order},
       {"reorder_point_max", c.reorder_point_max},
       {"system_wide_transit_gate", c.system_wide_transit_gate}};
}
inline void from_json(const nlohmann::json& j, EnvConfig& c) {
  j.at("capacity").get_to(c.capacity);
  j.at("holding_cost").get_to(c.holding_cost);
  j.at("stockout_cost").get_to(c.stockout_cost);
  j.at("processing_time_warehouse").get_to(c.processing_time_warehouse);
  j.at("processing_time_factory").get_to(c.processing_time_factory);
  j.at("service_time").get_to(c.service_time);
  j.at("max_days").get_to(c.max_days);
  j.at("max_stockouts").get_to(c.max_stockouts);
  j.at("initial_inventory").get_to(c.initial_inventory);
  j.at("max_order").get_to(c.max_order);
  j.at("reorder_point_max").get_to(c.reorder_point_max);
  j.at("system_wide_transit_gate").get_to(c.system_wide_transit_gate);
}

inline void to_json(nlohmann::json& j, const PipelineEntry& e) {
  j = {e.destination, e.quantity, e.arrival_day};
}
inline void from_json(const nlohmann::json& j, PipelineEntry& e) {
  e = {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>()};
}

inline void to_json(nlohmann::json& j, const EnvState& s) {
  j = {{"day", s.day},
       {"inventory", s.inventory},
       {"pipeline", s.pipeline},
       {"stockout_count", s.stockout_count},
       {"last_demand", s.last_demand},
       {"reorder_point", s.reorder_point},
       {"done", s.done}};
}
inline void from_json(const nlohmann::json& j, EnvState& s) {
  j.at("day").get_to(s.day);
  j.at("inventory").get_to(s.inventory);
  j.at("pipeline").get_to(s.pipeline);
  j.at("stockout_count").get_to(s.stockout_count);
  j.at("last_demand").get_to(s.last_demand);
  j.at("reorder_point").get_to(s.reorder_point);
  j.at("done").get_to(s.done);
}

inline void to_json(nlohmann::json& j, const DemandStream& d) {
  j = {{"config", d.config()},
       {"rng", d.rng().serialize()},
       {"held_value", d.held_value()},
       {"repeats_remaining", d.repeats_remaining()}};
}
inline void from_json(const nlohmann::json& j, DemandStream& d) {
  d = DemandStream::restore(j.at("config").get<DemandConfig>(), j.at("rng").get<std::string>(),
                            j.at("held_value").get<int>(), j.at("repeats_remaining").get<int>());
}

inline void to_json(nlohmann::json& j, const SupplyChainEnv& env) {
  j = {{"config", env.config()}, {"demand", env.demand_stream()}, {"state", env.state()}};
}
inline void from_json(const nlohmann::json& j, SupplyChainEnv& env) {
  env.restore(j.at("config").get<EnvConfig>(), j.at("demand").get<DemandStream>(),
              j.at("state").get<EnvState>());
}

}  // namespace supplyrl

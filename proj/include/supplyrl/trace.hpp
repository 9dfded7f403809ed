#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>
#include <string_view>

#include "supplyrl/env.hpp"

namespace supplyrl {

/// One simulator step as exported to trace CSVs.
struct TraceRow {
  int day = 0;  // day on which the step was taken (0-based)
  std::string task;
  Inventories inventory{};  // end-of-step
  int demand = 0;
  ActionVector action{};  // after range clamping
  std::array<int, kEchelons> shipped{};
  double reward = 0.0;
  int stockouts = 0;
  bool done = false;
};

inline constexpr std::string_view kTraceHeader =
    "day,task,I0,I1,I2,demand,Q0,Q1,Q2,R0,shipped0,shipped1,shipped2,reward,stockouts,done";

/// Shortest decimal text that reads back to the same double, "nan" for NaN.
inline std::string format_double(double x) {
  if (x != x) return "nan";
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

inline std::string format_trace_row(const TraceRow& r) {
  std::string s;
  s += std::to_string(r.day) + ',' + r.task;
  for (int v : r.inventory) s += ',' + std::to_string(v);
  s += ',' + std::to_string(r.demand);
  for (int v : r.action.order) s += ',' + std::to_string(v);
  s += ',' + std::to_string(r.action.reorder_point);
  for (int v : r.shipped) s += ',' + std::to_string(v);
  s += ',' + format_double(r.reward);
  s += ',' + std::to_string(r.stockouts);
  s += r.done ? ",1" : ",0";
  return s;
}

inline TraceRow make_trace_row(int day, std::string_view task, const ActionVector& action,
                               const StepResult& result, const EnvState& after, const EnvConfig& config) {
  TraceRow row;
  row.day = day;
  row.task = std::string(task);
  row.inventory = after.inventory;
  row.demand = result.info.demand;
  row.action = clamp_action(action, config);
  row.shipped = result.info.shipped;
  row.reward = result.reward;
  row.stockouts = result.info.stockout_count;
  row.done = result.done;
  return row;
}

}  // namespace supplyrl

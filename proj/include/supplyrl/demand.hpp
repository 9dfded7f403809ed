#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "supplyrl/core/errors.hpp"
#include "supplyrl/core/rng.hpp"

namespace supplyrl {

/// Customer demand regime: Normal(mean, std) draws, each held for
/// `batch_size` consecutive days.
struct DemandConfig {
  double mean = 2.0;
  double std = 0.0;
  int batch_size = 1;

  void validate() const {
    if (!(mean >= 0.0) || !std::isfinite(mean)) throw ConfigError("demand mean must be finite and >= 0");
    if (!(std >= 0.0) || !std::isfinite(std)) throw ConfigError("demand std must be finite and >= 0");
    if (batch_size < 1) throw ConfigError("demand batch_size must be >= 1");
  }

  friend bool operator==(const DemandConfig&, const DemandConfig&) = default;
};

/// Canonical task identifiers, in the order used by config files and CSVs.
inline constexpr std::array<std::string_view, 6> kTaskNames = {"Bat3", "Bat7", "Bat10",
                                                               "Sto1", "Sto01", "Sto0"};

inline bool is_task_name(std::string_view name) {
  for (auto n : kTaskNames)
    if (n == name) return true;
  return false;
}

/// The six test environments.
inline DemandConfig make_task(std::string_view name) {
  if (name == "Bat3") return {2.0, 0.1, 3};
  if (name == "Bat7") return {2.0, 0.1, 7};
  if (name == "Bat10") return {2.0, 0.1, 10};
  if (name == "Sto1") return {2.0, 1.0, 1};
  if (name == "Sto01") return {2.0, 0.1, 1};
  if (name == "Sto0") return {2.0, 0.0, 1};
  throw ConfigError("unknown task '" + std::string(name) +
                    "' (expected Bat3|Bat7|Bat10|Sto1|Sto01|Sto0)");
}

/// Seeded integer demand generator.
///
/// A fresh value is drawn as max(0, round(x)), x ~ Normal(mean, std), with
/// rounding half away from zero, then re-emitted until `batch_size` values
/// have been produced. Batches are aligned to the start of the stream, so
/// an environment reset that keeps the stream does not shift the phase.
class DemandStream {
 public:
  DemandStream() = default;
  DemandStream(DemandConfig config, std::uint64_t seed) : config_(config), rng_(seed) {
    config_.validate();
  }

  int next() {
    if (repeats_remaining_ > 0) {
      --repeats_remaining_;
      return held_value_;
    }
    const double x = config_.mean + config_.std * rng_.normal();
    held_value_ = static_cast<int>(std::max(0.0, std::round(x)));
    repeats_remaining_ = config_.batch_size - 1;
    return held_value_;
  }

  const DemandConfig& config() const noexcept { return config_; }
  int held_value() const noexcept { return held_value_; }
  int repeats_remaining() const noexcept { return repeats_remaining_; }
  const Rng& rng() const noexcept { return rng_; }

  /// Restores a stream from serialized parts (checkpoint loading).
  static DemandStream restore(DemandConfig config, const std::string& rng_state, int held_value,
                              int repeats_remaining) {
    DemandStream s;
    s.config_ = config;
    s.config_.validate();
    s.rng_.deserialize(rng_state);
    s.held_value_ = held_value;
    s.repeats_remaining_ = repeats_remaining;
    return s;
  }

  friend bool operator==(const DemandStream&, const DemandStream&) = default;

 private:
  DemandConfig config_{};
  Rng rng_{};
  int held_value_ = 0;
  int repeats_remaining_ = 0;
};

}  // namespace supplyrl

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "supplyrl/core/errors.hpp"
#include "supplyrl/io/csv.hpp"
#include "supplyrl/rl/trainer.hpp"

namespace supplyrl::io {

inline constexpr std::string_view kCheckpointFormat = "supplyrl-checkpoint";
inline constexpr int kCheckpointVersion = 1;

/// Serialises a trainer into the versioned checkpoint container. `run`
/// carries CLI-level context (target steps, preset, ...) and is stored
/// verbatim.
template <class Agent>
nlohmann::json make_checkpoint(const rl::Trainer<Agent>& trainer, const nlohmann::json& run = nlohmann::json::object()) {
  return {{"format", kCheckpointFormat},
          {"version", kCheckpointVersion},
          {"algo", Agent::kAlgo},
          {"run", run},
          {"trainer", trainer.to_json()}};
}

inline std::string dump_checkpoint(const nlohmann::json& checkpoint) { return checkpoint.dump(1) + '\n'; }

template <class Agent>
void save_checkpoint(const std::filesystem::path& path, const rl::Trainer<Agent>& trainer,
                     const nlohmann::json& run = nlohmann::json::object()) {
  write_file(path, dump_checkpoint(make_checkpoint(trainer, run)));
}

/// Parses and validates the container. Throws CheckpointError on a format
/// or version mismatch and IoError when the file cannot be read.
inline nlohmann::json parse_checkpoint(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != kCheckpointFormat) throw CheckpointError("not a supplyrl checkpoint");
  if (!j.contains("version") || !j.at("version").is_number_integer() ||
      j.at("version").get<int>() != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + j.value("version", nlohmann::json()).dump() +
                          " (expected " + std::to_string(kCheckpointVersion) + ")");
  if (!j.contains("algo") || !j.contains("trainer")) throw CheckpointError("checkpoint is missing required fields");
  return j;
}

inline nlohmann::json load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(read_file(path)); }

inline std::string checkpoint_algo(const nlohmann::json& checkpoint) { return checkpoint.at("algo").get<std::string>(); }

template <class Agent>
rl::Trainer<Agent> trainer_from_checkpoint(const nlohmann::json& checkpoint) {
  const auto algo = checkpoint_algo(checkpoint);
  if (algo != Agent::kAlgo)
    throw CheckpointError("checkpoint holds a '" + algo + "' learner, expected '" + Agent::kAlgo + "'");
  try {
    return rl::Trainer<Agent>::from_json(checkpoint.at("trainer"));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint holds an invalid configuration: ") + e.what());
  }
}

}  // namespace supplyrl::io

#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "supplyrl/core/rng.hpp"
#include "supplyrl/env.hpp"
#include "supplyrl/io/checkpoint.hpp"
#include "supplyrl/io/serialize.hpp"
#include "supplyrl/rl/ppo.hpp"

namespace supplyrl::io {

inline constexpr std::string_view kLibraryVersion = "0.1.0";
inline constexpr int kMetadataVersion = 1;

/// Everything needed to replay a run bit-exactly: the CLI verb and its
/// arguments, environment and learner configuration, seeds and the
/// generator conventions in force.
inline nlohmann::json run_metadata(std::string_view verb, const nlohmann::json& run, const EnvConfig& env,
                                   const nlohmann::json& learner, std::uint64_t seed) {
  return {{"format_version", kMetadataVersion},
          {"library_version", kLibraryVersion},
          {"checkpoint_version", kCheckpointVersion},
          {"verb", verb},
          {"run", run},
          {"env", env},
          {"learner", learner},
          {"seed",
           {{"run", seed},
            {"policy_init", derive_seed(seed, streams::kPolicyInit)},
            {"sampling", derive_seed(seed, streams::kSampling)},
            {"baseline", derive_seed(seed, streams::kBaseline)},
            {"demand_phase0", derive_seed(seed, streams::kDemandBase)}}},
          {"rng",
           {{"family", kRngFamily},
            {"uniform", "53-bit mantissa from the top bits of one 64-bit draw"},
            {"integer", "rejection sampling on 64-bit draws"},
            {"normal", kNormalMethod},
            {"seed_derivation", "splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x5851f42d4c957f2d))"}}},
          {"init",
           {{"dense", "uniform(+-1/sqrt(fan_in)), zero bias"},
            {"lstm", "uniform(+-1/sqrt(hidden)), zero bias"}}}};
}

inline nlohmann::json learner_metadata(std::string_view algo, const rl::PpoHyperparams& hp,
                                       const rl::PolicyArch& arch) {
  return {{"algo", algo}, {"hyperparams", hp}, {"arch", arch}};
}

}  // namespace supplyrl::io

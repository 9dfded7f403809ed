#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "supplyrl/continual.hpp"
#include "supplyrl/core/errors.hpp"
#include "supplyrl/rl/trainer.hpp"
#include "supplyrl/trace.hpp"

namespace supplyrl::io {

inline constexpr std::string_view kCurveHeader =
    "algo,task,seed,env_steps,window_mean_reward,policy_loss,value_loss,entropy,clip_fraction";
inline constexpr std::string_view kContinualHeader =
    "algo,preset,seed,phase,task,env_steps,window_mean_reward,boundary";
inline constexpr std::string_view kEpisodeRewardsHeader = "episode,reward";

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string curve_csv(std::string_view algo, std::string_view task, std::uint64_t seed,
                             const std::vector<rl::CurvePoint>& curve) {
  std::string s(kCurveHeader);
  s += '\n';
  for (const auto& p : curve) {
    s += std::string(algo) + ',' + std::string(task) + ',' + std::to_string(seed) + ',' +
         std::to_string(p.env_steps) + ',' + format_double(p.window_mean) + ',' + format_double(p.loss.policy_loss) +
         ',' + format_double(p.loss.value_loss) + ',' + format_double(p.loss.entropy) + ',' +
         format_double(p.loss.clip_fraction) + '\n';
  }
  return s;
}

/// Learning-curve rows tagged with phase and task, plus one `boundary=1`
/// row per phase switch carrying the window mean at the switch.
inline std::string continual_csv(std::string_view algo, std::string_view preset, std::uint64_t seed,
                                 const std::vector<std::string>& tasks, const std::vector<rl::CurvePoint>& curve,
                                 const std::vector<rl::PhaseBoundary>& boundaries, std::size_t window_size) {
  std::string s(kContinualHeader);
  s += '\n';
  auto row = [&](std::size_t phase, std::int64_t steps, double mean, bool boundary) {
    s += std::string(algo) + ',' + std::string(preset) + ',' + std::to_string(seed) + ',' + std::to_string(phase) +
         ',' + tasks[phase] + ',' + std::to_string(steps) + ',' + format_double(mean) + (boundary ? ",1\n" : ",0\n");
  };
  std::size_t b = 0;
  for (const auto& p : curve) {
    for (; b < boundaries.size() && boundaries[b].env_step <= p.env_steps; ++b) {
      rl::EpisodeRewardWindow w(window_size);
      w.assign(boundaries[b].window_snapshot);
      row(boundaries[b].phase, boundaries[b].env_step, w.mean(), true);
    }
    row(p.phase, p.env_steps, p.window_mean, false);
  }
  return s;
}

inline std::string trace_csv(const std::vector<TraceRow>& rows) {
  std::string s(kTraceHeader);
  s += '\n';
  for (const auto& r : rows) s += format_trace_row(r) + '\n';
  return s;
}

inline std::string episode_rewards_csv(const std::vector<double>& rewards) {
  std::string s(kEpisodeRewardsHeader);
  s += '\n';
  for (std::size_t k = 0; k < rewards.size(); ++k) s += std::to_string(k) + ',' + format_double(rewards[k]) + '\n';
  return s;
}

}  // namespace supplyrl::io

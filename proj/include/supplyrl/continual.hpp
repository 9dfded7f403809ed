#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "supplyrl/core/errors.hpp"
#include "supplyrl/demand.hpp"
#include "supplyrl/rl/trainer.hpp"

namespace supplyrl {

inline constexpr std::array<std::string_view, 6> kSchedulePresets = {
    "batch-up", "batch-down", "sto-up", "sto-down", "extreme-bat-to-sto", "extreme-sto-to-bat"};

/// Ordered demand regimes applied to one persistent learner. `tasks` is the
/// fully expanded phase list (the preset's task list repeated `cycles`
/// times).
struct TaskSchedule {
  std::string preset;
  std::vector<std::string> tasks;
  std::int64_t phase_length = 200000;
  int cycles = 1;

  std::int64_t total_steps() const { return phase_length * static_cast<std::int64_t>(tasks.size()); }

  void validate(std::size_t n_steps) const {
    if (cycles < 1) throw ConfigError("cycles must be >= 1");
    if (tasks.empty()) throw ConfigError("schedule has no tasks");
    for (const auto& t : tasks) make_task(t);
    if (phase_length < static_cast<std::int64_t>(n_steps))
      throw ConfigError("phase_length must be >= n_steps");
  }
};

inline std::vector<std::string> preset_tasks(std::string_view preset) {
  if (preset == "batch-up") return {"Bat3", "Bat7", "Bat10"};
  if (preset == "batch-down") return {"Bat10", "Bat7", "Bat3"};
  if (preset == "sto-up") return {"Sto0", "Sto01", "Sto1"};
  if (preset == "sto-down") return {"Sto1", "Sto01", "Sto0"};
  if (preset == "extreme-bat-to-sto") return {"Bat10", "Sto0"};
  if (preset == "extreme-sto-to-bat") return {"Sto0", "Bat10"};
  throw ConfigError("unknown schedule preset '" + std::string(preset) +
                    "' (expected batch-up|batch-down|sto-up|sto-down|extreme-bat-to-sto|extreme-sto-to-bat)");
}

inline TaskSchedule make_schedule(std::string_view preset, std::int64_t phase_length, int cycles) {
  if (cycles < 1) throw ConfigError("cycles must be >= 1");
  if (phase_length <= 0) throw ConfigError("phase_length must be > 0");
  const auto base = preset_tasks(preset);
  TaskSchedule s{std::string(preset), {}, phase_length, cycles};
  for (int c = 0; c < cycles; ++c) s.tasks.insert(s.tasks.end(), base.begin(), base.end());
  return s;
}

/// Schedule consisting of a single task, used to compare against plain
/// training.
inline TaskSchedule single_task_schedule(const std::string& task, std::int64_t phase_length) {
  make_task(task);
  return {task, {task}, phase_length, 1};
}

struct PhaseLog {
  std::size_t phase = 0;
  std::string task;
  std::int64_t start_step = 0;
  std::int64_t end_step = 0;
  double end_window_mean = 0.0;   // window mean when the phase handed over (or at run end)
  double best_window_mean = 0.0;  // best logged window mean inside the phase; NaN if none
};

template <class Agent>
std::vector<PhaseLog> phase_logs(const rl::Trainer<Agent>& trainer) {
  const auto& session = trainer.session();
  const auto& bounds = session.boundaries();
  std::vector<PhaseLog> logs;
  for (std::size_t p = 0; p <= session.phase(); ++p) {
    PhaseLog log;
    log.phase = p;
    log.task = session.tasks()[p];
    log.start_step = p == 0 ? 0 : bounds[p - 1].env_step;
    if (p < bounds.size()) {
      log.end_step = bounds[p].env_step;
      rl::EpisodeRewardWindow w(session.window().capacity());
      w.assign(bounds[p].window_snapshot);
      log.end_window_mean = w.mean();
    } else {
      log.end_step = session.env_steps();
      log.end_window_mean = session.window().mean();
    }
    log.best_window_mean = std::numeric_limits<double>::quiet_NaN();
    for (const auto& pt : trainer.curve()) {
      if (pt.phase != p || std::isnan(pt.window_mean)) continue;
      if (std::isnan(log.best_window_mean) || pt.window_mean > log.best_window_mean)
        log.best_window_mean = pt.window_mean;
    }
    logs.push_back(log);
  }
  return logs;
}

/// Runs (or resumes) a continual trainer to `target_steps`.
template <class Agent, class BoundaryHook>
void continue_continual(rl::Trainer<Agent>& trainer, std::int64_t target_steps, BoundaryHook&& on_boundary) {
  std::size_t seen = trainer.session().boundaries().size();
  trainer.run(target_steps, [&](const rl::Trainer<Agent>& t) {
    const auto& bounds = t.session().boundaries();
    for (; seen < bounds.size(); ++seen) on_boundary(t, bounds[seen].phase);
  });
}

template <class Agent>
struct ContinualResult {
  rl::Trainer<Agent> trainer;
  std::vector<PhaseLog> phases;
};

/// Trains one learner through every phase of `schedule`. Learner
/// parameters, optimiser state and the reward window carry over between
/// phases; only the demand regime changes, at the first episode reset after
/// each phase threshold. `on_boundary(trainer, phase)` fires after the
/// first update that follows a switch into `phase`.
template <class Agent, class BoundaryHook>
ContinualResult<Agent> run_continual(const EnvConfig& env_config, const TaskSchedule& schedule,
                                     const rl::PpoHyperparams& hp, const rl::PolicyArch& arch, std::uint64_t seed,
                                     BoundaryHook&& on_boundary) {
  schedule.validate(hp.n_steps);
  rl::Trainer<Agent> trainer(env_config, schedule.tasks, schedule.phase_length, hp, arch, seed);
  continue_continual(trainer, schedule.total_steps(), on_boundary);
  auto phases = phase_logs(trainer);
  return {std::move(trainer), std::move(phases)};
}

template <class Agent>
ContinualResult<Agent> run_continual(const EnvConfig& env_config, const TaskSchedule& schedule,
                                     const rl::PpoHyperparams& hp, const rl::PolicyArch& arch, std::uint64_t seed) {
  return run_continual<Agent>(env_config, schedule, hp, arch, seed, [](const rl::Trainer<Agent>&, std::size_t) {});
}

/// Per-task transfer and forgetting, plus per-phase dip depth.
///
/// With start(p) the first logged window mean inside phase p:
///   forward_transfer[k] = start(k-th later occurrence) - start(first occurrence)
///   forgetting[k]       = best mean in all earlier occurrences - start(k-th later occurrence)
///   dip_depth(p)        = max over points in the first 10% of phase p of
///                         (final mean of phase p-1 - point mean)
/// Undefined entries are NaN.
struct TaskTransfer {
  std::string task;
  std::vector<std::size_t> occurrences;
  std::vector<double> forward_transfer;
  std::vector<double> forgetting;
};

struct PhaseDip {
  std::size_t phase = 0;
  std::string task;
  double dip_depth = 0.0;
};

struct TransferMetrics {
  std::vector<TaskTransfer> tasks;
  std::vector<PhaseDip> dips;
};

inline TransferMetrics transfer_metrics(const std::vector<PhaseLog>& phases, const std::vector<rl::CurvePoint>& curve) {
  if (phases.size() < 2) throw UsageError("transfer metrics are undefined for fewer than two phases");
  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  auto points_in = [&](std::size_t p) {
    std::vector<const rl::CurvePoint*> pts;
    for (const auto& c : curve)
      if (c.phase == p && !std::isnan(c.window_mean)) pts.push_back(&c);
    return pts;
  };
  auto start_mean = [&](std::size_t p) {
    const auto pts = points_in(p);
    return pts.empty() ? kNaN : pts.front()->window_mean;
  };

  TransferMetrics m;
  std::map<std::string, std::vector<std::size_t>> occurrences;
  std::vector<std::string> order;
  for (const auto& ph : phases) {
    if (!occurrences.contains(ph.task)) order.push_back(ph.task);
    occurrences[ph.task].push_back(ph.phase);
  }
  for (const auto& task : order) {
    TaskTransfer tt;
    tt.task = task;
    tt.occurrences = occurrences[task];
    const double first = start_mean(tt.occurrences.front());
    double best = kNaN;
    for (std::size_t k = 0; k < tt.occurrences.size(); ++k) {
      if (k > 0) {
        const double s = start_mean(tt.occurrences[k]);
        tt.forward_transfer.push_back(s - first);
        tt.forgetting.push_back(best - s);
      }
      for (const auto* pt : points_in(tt.occurrences[k]))
        if (std::isnan(best) || pt->window_mean > best) best = pt->window_mean;
    }
    m.tasks.push_back(std::move(tt));
  }

  for (std::size_t p = 1; p < phases.size(); ++p) {
    const PhaseLog& ph = phases[p];
    const double prev_final = phases[p - 1].end_window_mean;
    const double horizon = static_cast<double>(ph.start_step) + 0.1 * static_cast<double>(ph.end_step - ph.start_step);
    double dip = kNaN;
    for (const auto* pt : points_in(p)) {
      if (static_cast<double>(pt->env_steps) > horizon) break;
      const double drop = prev_final - pt->window_mean;
      if (std::isnan(dip) || drop > dip) dip = drop;
    }
    m.dips.push_back({p, ph.task, dip});
  }
  return m;
}

}  // namespace supplyrl

#pragma once

// The alternating training loop. Each phase freezes M, lets the controller
// act and learn, records the resulting trials, retrains M on the history,
// optionally tries one structural change, and credits every trial of the
// phase with the compression progress it enabled.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cmrl/config.hpp"
#include "cmrl/environments.hpp"
#include "cmrl/history.hpp"
#include "cmrl/policy_net.hpp"

namespace cmrl {

struct PhaseReport {
  std::size_t phase = 0;
  double controller_metric = 0.0;  // best fitness (C2, C3) or mean return (C1)
  double mean_return = 0.0;        // external return of the phase's recorded trials
  CodeLengthReport code;           // M after sleep, on the whole history
  double intrinsic_total = 0.0;
  std::size_t hidden = 0;
  std::string mutation = "none";
  bool accepted = false;
  bool diverged = false;
  std::uint64_t model_hash = 0;
  double seconds = 0.0;
};

struct EvolutionRow {
  std::size_t phase = 0;
  GenerationLog log;
};

struct CuriosityRow {
  std::size_t phase = 0;
  std::size_t trial_id = 0;
  double bits_before = 0.0;
  double bits_after = 0.0;
  double intrinsic = 0.0;
};

struct RunState {
  RunConfig cfg;
  EnvSpec env;
  WorldModel model;
  HistoryStore history;
  StreamSet streams;

  QFunction q;  // C1
  std::size_t q_steps = 0;
  PolicyNet policy;  // C2
  CMSpec cm;         // C3
  std::vector<Genome> population;
  double sigma = 0.0;  // step size at the end of the last phase
  Genome best;

  std::size_t phase = 0;
  bool stopped = false;
  std::vector<PhaseReport> reports;
  std::vector<EvolutionRow> evolution_log;
  std::vector<CuriosityRow> curiosity_log;
};

/// Fresh run: environment, initial M, controller and history.
RunState init_run(const RunConfig& cfg);
/// Runs one phase and appends its report.
const PhaseReport& run_phase(RunState& state);
/// Runs phases until cfg.phases are done, the stopping criterion holds, or
/// `max_phase` is reached. Checkpoints after every phase when `out_dir` is
/// set; on failure the partial history is saved next to the last checkpoint.
void run(RunState& state, std::optional<std::size_t> max_phase = std::nullopt,
         const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Mean external return over the last `window` trials, or over all if fewer.
double recent_mean_return(const HistoryStore& history, std::size_t window);
bool stop_criterion_met(const RunState& state);

struct EvalSummary {
  std::size_t trials = 0;
  double mean_return = 0.0;
  double optimal = 0.0;
};
/// Runs `trials` unrecorded greedy trials. Optionally keeps them in `trace`.
EvalSummary evaluate_controller(const RunState& state, std::size_t trials, HistoryStore* trace = nullptr);

void save_checkpoint(const RunState& state, const std::filesystem::path& dir);
RunState load_checkpoint(const std::filesystem::path& dir);

enum class MetricsTable { trials, phases, evolution, curiosity };
void export_metrics(const RunState& state, MetricsTable table, std::ostream& out);

}  // namespace cmrl

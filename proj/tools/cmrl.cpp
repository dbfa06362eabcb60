// Command-line entry point: run, resume, eval, export-metrics.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "cmrl/orchestrator.hpp"
#include "cmrl/text_io.hpp"

namespace {

namespace fs = std::filesystem;

void print_phase(const cmrl::PhaseReport& r) {
  std::cout << "phase " << r.phase << ": metric=" << r.controller_metric << " return=" << r.mean_return
            << " bits=" << r.code.total << " h=" << r.hidden << " intrinsic=" << r.intrinsic_total << '\n';
}

void finish(const cmrl::RunState& st, std::size_t reported_from) {
  for (std::size_t i = reported_from; i < st.reports.size(); ++i) print_phase(st.reports[i]);
  std::cout << (st.stopped ? "stopped: criterion met" : "done") << " after phase " << st.phase << " of "
            << st.cfg.phases << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Alternating controller/world-model training"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "start a new run");
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "run";
  std::optional<std::size_t> stop_after;
  run_cmd->add_option("--config", config_path, "configuration file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--seed", seed, "master seed, overrides run.seed");
  run_cmd->add_option("--out", out_dir, "output directory");
  run_cmd->add_option("--stop-after", stop_after, "stop after this phase, leaving a resumable checkpoint");

  auto* resume_cmd = app.add_subcommand("resume", "continue a checkpointed run");
  std::string from_dir;
  std::optional<std::size_t> resume_stop;
  resume_cmd->add_option("--from", from_dir, "checkpoint directory")->required();
  resume_cmd->add_option("--stop-after", resume_stop, "stop after this phase");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate the checkpointed controller without learning");
  std::string checkpoint_dir;
  std::size_t trials = 20;
  std::string trace_path;
  eval_cmd->add_option("--checkpoint", checkpoint_dir, "checkpoint directory")->required();
  eval_cmd->add_option("--trials", trials, "number of evaluation trials");
  eval_cmd->add_option("--trace", trace_path, "write the evaluation trials in history format");

  auto* export_cmd = app.add_subcommand("export-metrics", "print a metrics table");
  std::string export_dir;
  std::string format = "csv";
  std::string table = "phases";
  export_cmd->add_option("--from", export_dir, "checkpoint directory")->required();
  export_cmd->add_option("--format", format, "output format")->check(CLI::IsMember({"csv"}));
  export_cmd->add_option("--table", table, "which table")
      ->check(CLI::IsMember({"trials", "phases", "evolution", "curiosity"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      auto cfg = cmrl::load_config(config_path);
      if (seed) cfg.seed = *seed;
      auto st = cmrl::init_run(cfg);
      cmrl::run(st, stop_after, fs::path(out_dir));
      if (st.phase == 0) cmrl::save_checkpoint(st, out_dir);
      finish(st, 0);
    } else if (*resume_cmd) {
      auto st = cmrl::load_checkpoint(from_dir);
      const auto already = st.reports.size();
      cmrl::run(st, resume_stop, fs::path(from_dir));
      finish(st, already);
    } else if (*eval_cmd) {
      const auto st = cmrl::load_checkpoint(checkpoint_dir);
      std::optional<cmrl::HistoryStore> trace;
      if (!trace_path.empty()) trace.emplace(st.env.dims, st.cfg.seed);
      const auto summary = cmrl::evaluate_controller(st, trials, trace ? &*trace : nullptr);
      std::cout << "trials=" << summary.trials << " mean_return=" << cmrl::text::format_real(summary.mean_return)
                << " optimal=" << cmrl::text::format_real(summary.optimal) << '\n';
      if (trace) trace->save(trace_path);
    } else if (*export_cmd) {
      const auto st = cmrl::load_checkpoint(export_dir);
      auto which = cmrl::MetricsTable::phases;
      if (table == "trials") which = cmrl::MetricsTable::trials;
      if (table == "evolution") which = cmrl::MetricsTable::evolution;
      if (table == "curiosity") which = cmrl::MetricsTable::curiosity;
      cmrl::export_metrics(st, which, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

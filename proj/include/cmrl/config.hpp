#pragma once

// Run configuration. Text form: one `dotted.key = value` per line, `#` starts
// a comment. Unknown keys are rejected.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "cmrl/cm_network.hpp"
#include "cmrl/curiosity.hpp"
#include "cmrl/evolution.hpp"
#include "cmrl/q_learning.hpp"
#include "cmrl/world_model.hpp"

namespace cmrl {

enum class Variant { C1, C2, C3 };
const char* to_string(Variant variant);

struct RunConfig {
  // run.*
  std::size_t phases = 10;
  std::size_t trials_per_phase = 8;
  std::uint64_t seed = 1;
  std::size_t think_k = 0;
  bool stop_on_optimal = true;
  double stop_fraction = 0.95;
  std::size_t stop_window = 20;

  // env.*
  std::string env_name = "tmaze";
  std::map<std::string, double> env_params;

  // controller.*
  Variant variant = Variant::C3;
  CMConfig cm;
  bool q_markov = true;  // C1 features: M's Markovized state, or raw sense(t)
  std::size_t policy_hidden = 4;
  std::size_t eval_trials = 3;
  double init_scale = 0.5;

  // model.*
  std::size_t model_hidden = 4;
  SleepConfig sleep;
  std::size_t replay_k = 8;
  ReplayRule replay_rule = ReplayRule::always_include_latest;
  std::size_t structure_every = 2;  // 0 disables structural search
  std::size_t retrain_epochs = 50;
  std::size_t scoring_k = 8;
  StructureConfig structure;

  CodingScheme coding;
  EvolutionConfig evolution;
  QConfig q;

  // curiosity.*
  CuriosityConfig curiosity;
  SleepConfig probe{5, 0.05, 1e-4, 5.0};
  std::size_t probe_replay = 4;

  void validate() const;
};

/// Applies one `key = value` assignment.
void set_option(RunConfig& cfg, const std::string& key, const std::string& value);

RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);
/// Every key with its current value, in a stable order. parse_config reads
/// it back to an equal configuration.
void write_config(std::ostream& out, const RunConfig& cfg);

}  // namespace cmrl

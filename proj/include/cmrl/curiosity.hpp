#pragma once

// Intrinsic reward for compression progress: how many bits the sleep phase
// saved on a trial's data.

#include <span>

#include "cmrl/world_model.hpp"

namespace cmrl {

struct CuriosityConfig {
  double eta = 1.0;
  bool clip_negative = true;
  bool enabled = false;

  void validate() const;
};

/// eta * (before.total - after.total), clamped at 0 when clip_negative, and 0
/// when disabled. Both reports must cover the same steps.
double intrinsic_reward(const CodeLengthReport& before, const CodeLengthReport& after, const CuriosityConfig& cfg);

/// Predicts the reward a trial would earn without running a real sleep
/// phase: a copy of M is trained on `replay` plus `episode` and the trial is
/// scored before and after.
double probe_intrinsic(const WorldModel& model, Episode episode, std::span<const Episode> replay,
                       const CuriosityConfig& cfg, const SleepConfig& probe);

}  // namespace cmrl

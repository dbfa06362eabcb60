#include "cmrl/curiosity.hpp"

#include <stdexcept>

#include "cmrl/errors.hpp"

namespace cmrl {

void CuriosityConfig::validate() const {
  if (!(eta >= 0)) throw std::invalid_argument("curiosity.eta must be >= 0");
}

double intrinsic_reward(const CodeLengthReport& before, const CodeLengthReport& after, const CuriosityConfig& cfg) {
  if (before.steps_scored != after.steps_scored) {
    throw ContractError("curiosity reports cover different spans (" + std::to_string(before.steps_scored) + " vs " +
                        std::to_string(after.steps_scored) + " steps)");
  }
  if (!cfg.enabled) return 0.0;
  const double gain = cfg.eta * (before.total - after.total);
  return cfg.clip_negative && gain < 0.0 ? 0.0 : gain;
}

double probe_intrinsic(const WorldModel& model, Episode episode, std::span<const Episode> replay,
                       const CuriosityConfig& cfg, const SleepConfig& probe) {
  if (!cfg.enabled) return 0.0;
  std::vector<Episode> data(replay.begin(), replay.end());
  data.push_back(episode);
  const auto trained = sleep_train(model, data, probe);
  const Episode single[] = {episode};
  return intrinsic_reward(code_length(model, single), code_length(trained.model, single), cfg);
}

}  // namespace cmrl

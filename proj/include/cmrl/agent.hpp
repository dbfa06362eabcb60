#pragma once

// Running one trial of a controller in an environment, and the Markovized
// state (sense(t), hidden(t), pred(t)) that M provides to flat controllers.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cmrl/environments.hpp"
#include "cmrl/history.hpp"
#include "cmrl/world_model.hpp"

namespace cmrl {

class Agent {
 public:
  virtual ~Agent() = default;
  virtual void begin() {}
  /// Chooses the action for sense(t).
  virtual std::size_t act(std::span<const double> sense) = 0;
  /// Called once with the terminal sense vector.
  virtual void end(std::span<const double> /*final_sense*/, bool /*truncated*/) {}
};

struct TrialTrace {
  /// One record per action taken, plus a final record holding the terminal
  /// observation and reward with an all-zero action. Times start at 1.
  std::vector<StepRecord> records;
  double external_return = 0.0;
};

TrialTrace run_trial(const EnvSpec& env, std::uint64_t trial_seed, Agent& agent);

/// Concatenation of sense(t), hidden(t) and pred(t); `prev` is M's state
/// after consuming all(t-1), or the reset state at trial start.
std::vector<double> markov_state(const WorldModel& model, std::span<const double> sense_t, const ModelState& prev);

/// Stable names for the components of markov_state: "s<i>", the hidden
/// unit labels, "p<i>".
std::vector<std::string> markov_keys(const WorldModel& model);
/// Names for raw sense(t) features: "s<i>".
std::vector<std::string> sense_keys(const Dims& dims);

/// Feeds M along a trial so the Markovized state is available at each step.
class MarkovTracker {
 public:
  explicit MarkovTracker(const WorldModel& model) : model_(&model), state_(reset_state(model)) {}
  void reset() { state_ = reset_state(*model_); }
  std::vector<double> features(std::span<const double> sense) const { return markov_state(*model_, sense, state_); }
  /// Advances M with all(t) = sense(t) followed by the one-hot action.
  void advance(std::span<const double> sense, std::size_t action);
  const ModelState& state() const { return state_; }

 private:
  const WorldModel* model_;
  ModelState state_;
};

}  // namespace cmrl

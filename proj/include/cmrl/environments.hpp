#pragma once

// Seeded, partially observable test tasks with exhaustively solvable optima.
//
// Environments are plain values: reset() builds a state from a trial seed and
// step() maps (state, action) to the next state. Nothing is hidden in mutable
// objects, so a trial can be replayed from its seed and action sequence.
//
//   tmaze           cue at t=1, walk a corridor of length L, turn at the end
//   delayed_recall  remember a bit for L steps
//   two_room        one-way doors into a predictable room and a noise room
//   oracle_mdp      4-state, 2-action, fully observable
//   toggle          latent bit that flips every step
//   gridworld       4x4, reach goal A or B

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cmrl/history.hpp"

namespace cmrl {

struct EnvSpec {
  std::string name;
  Dims dims;
  std::size_t max_steps = 1;
  std::uint64_t seed = 0;
  std::map<std::string, double> params;

  double param(const std::string& key, double fallback) const;
  void validate() const;
  bool operator==(const EnvSpec&) const = default;
};

EnvSpec tmaze_spec(std::size_t corridor_length, std::uint64_t seed);
EnvSpec delayed_recall_spec(std::size_t delay, std::uint64_t seed);
EnvSpec two_room_spec(std::uint64_t seed, std::size_t max_steps = 10);
EnvSpec oracle_mdp_spec(std::uint64_t seed, std::size_t max_steps = 10);
EnvSpec toggle_spec(std::size_t length, std::uint64_t seed);
/// goal 0 is A (top right), goal 1 is B (bottom left).
EnvSpec gridworld_spec(int goal, std::uint64_t seed);

/// Builds a spec by name with defaults for any parameter not in `params`.
EnvSpec make_env(const std::string& name, const std::map<std::string, double>& params, std::uint64_t seed);

struct EnvState {
  std::uint64_t key = 0;  // per-trial randomness, fixed at reset
  std::size_t step = 0;   // actions taken so far
  bool done = false;
  int position = 0;
  int cue = 0;
  double signal = 0.0;

  bool operator==(const EnvState&) const = default;
};

struct Observation {
  EnvState state;
  std::vector<double> in;
  std::vector<double> r;
};

struct Transition {
  EnvState state;
  std::vector<double> in;
  std::vector<double> r;
  bool done = false;
  bool truncated = false;  // ended by the step cap rather than by the task
};

Observation reset(const EnvSpec& spec, std::uint64_t trial_seed);
/// `action` is out(t), length o; the executed action is its argmax.
Transition step(const EnvSpec& spec, const EnvState& state, std::span<const double> action);

/// argmax with the lowest index winning ties.
std::size_t decode_action(std::span<const double> out);
std::vector<double> one_hot(std::size_t index, std::size_t size);

/// Two-room room codes in EnvState::position.
inline constexpr int kJunction = 0;
inline constexpr int kRegularRoom = 1;
inline constexpr int kNoiseRoom = 2;

/// Maximum expected external return, by exhaustive search over action
/// sequences for every latent case. Discounted when the spec sets "gamma".
double optimal_return(const EnvSpec& spec);

/// Trial seeds covering each latent configuration once, with probabilities.
std::vector<std::pair<std::uint64_t, double>> latent_cases(const EnvSpec& spec);

}  // namespace cmrl

#include "cmrl/environments.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "cmrl/errors.hpp"
#include "cmrl/rng.hpp"

namespace cmrl {

double EnvSpec::param(const std::string& key, double fallback) const {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

void EnvSpec::validate() const {
  if (dims.m < 1 || dims.n < 1 || dims.o < 1) throw SpecError("environment '" + name + "' needs m, n, o >= 1");
  if (max_steps < 1) throw SpecError("environment '" + name + "' needs max_steps >= 1");
}

namespace {

EnvSpec base(std::string name, Dims dims, std::size_t max_steps, std::uint64_t seed) {
  EnvSpec spec{std::move(name), dims, max_steps, seed, {}};
  spec.validate();
  return spec;
}

std::size_t positive(double value, const char* what) {
  if (!(value >= 1) || value != std::floor(value)) throw SpecError(std::string(what) + " must be a positive integer");
  return static_cast<std::size_t>(value);
}

// Oracle MDP tables: next[s][a] and reward[s][a].
constexpr int kMdpNext[4][2] = {{0, 1}, {0, 2}, {1, 3}, {0, 3}};
constexpr double kMdpReward[4][2] = {{0.1, 0.0}, {0.0, 0.0}, {0.0, 0.0}, {1.0, 0.0}};

constexpr double kRoomStepCost = -0.01;
constexpr double kGridStepCost = -0.01;
constexpr int kGrid = 4;

double noise_value(std::uint64_t key, std::size_t step) {
  const auto bits = splitmix64(key ^ (0x9e3779b97f4a7c15ULL * (step + 1))) >> 48;
  return (static_cast<double>(bits) - 32768.0) / 32768.0;
}

std::vector<double> tmaze_obs(const EnvSpec& spec, const EnvState& s) {
  const int L = static_cast<int>(spec.param("corridor_length", 1));
  if (s.done) return {0.0, 0.0, 0.0};
  return {s.step == 0 ? static_cast<double>(s.cue) : 0.0, s.position < L ? 1.0 : 0.0, s.position == L ? 1.0 : 0.0};
}

std::vector<double> delayed_recall_obs(const EnvSpec& spec, const EnvState& s) {
  const auto L = static_cast<std::size_t>(spec.param("delay", 1));
  if (s.done) return {0.0, 0.0};
  return {s.step == 0 ? static_cast<double>(s.cue) : 0.0, s.step == L ? 1.0 : 0.0};
}

std::vector<double> two_room_obs(const EnvState& s) {
  return {s.position == kJunction ? 1.0 : 0.0, s.position == kRegularRoom ? 1.0 : 0.0,
          s.position == kNoiseRoom ? 1.0 : 0.0, s.signal};
}

std::vector<double> mdp_obs(const EnvState& s) { return one_hot(static_cast<std::size_t>(s.position), 4); }

std::vector<double> grid_obs(const EnvState& s) {
  std::vector<double> obs(2 * kGrid, 0.0);
  obs[static_cast<std::size_t>(s.position % kGrid)] = 1.0;
  obs[static_cast<std::size_t>(kGrid + s.position / kGrid)] = 1.0;
  return obs;
}

int grid_goal(const EnvSpec& spec) {
  return spec.param("goal", 0) == 0 ? kGrid - 1 : (kGrid - 1) * kGrid;  // A = (3,0), B = (0,3)
}

}  // namespace

EnvSpec tmaze_spec(std::size_t corridor_length, std::uint64_t seed) {
  if (corridor_length < 1) throw SpecError("corridor_length must be >= 1");
  auto spec = base("tmaze", {3, 1, 3}, 2 * corridor_length + 2, seed);
  spec.params["corridor_length"] = static_cast<double>(corridor_length);
  return spec;
}

EnvSpec delayed_recall_spec(std::size_t delay, std::uint64_t seed) {
  if (delay < 1) throw SpecError("delay must be >= 1");
  auto spec = base("delayed_recall", {2, 1, 2}, delay + 1, seed);
  spec.params["delay"] = static_cast<double>(delay);
  return spec;
}

EnvSpec two_room_spec(std::uint64_t seed, std::size_t max_steps) { return base("two_room", {4, 1, 3}, max_steps, seed); }

EnvSpec oracle_mdp_spec(std::uint64_t seed, std::size_t max_steps) {
  auto spec = base("oracle_mdp", {4, 1, 2}, max_steps, seed);
  spec.params["gamma"] = 0.9;
  return spec;
}

EnvSpec toggle_spec(std::size_t length, std::uint64_t seed) {
  if (length < 1) throw SpecError("length must be >= 1");
  auto spec = base("toggle", {1, 1, 2}, length, seed);
  spec.params["length"] = static_cast<double>(length);
  return spec;
}

EnvSpec gridworld_spec(int goal, std::uint64_t seed) {
  if (goal != 0 && goal != 1) throw SpecError("gridworld goal must be 0 (A) or 1 (B)");
  auto spec = base("gridworld", {2 * kGrid, 1, 4}, 10, seed);
  spec.params["goal"] = goal;
  return spec;
}

EnvSpec make_env(const std::string& name, const std::map<std::string, double>& params, std::uint64_t seed) {
  auto get = [&](const std::string& key, double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  };
  static const std::map<std::string, std::vector<std::string>> known = {
      {"tmaze", {"corridor_length"}}, {"delayed_recall", {"delay"}}, {"two_room", {}},
      {"oracle_mdp", {}},            {"toggle", {"length", "first_bit"}}, {"gridworld", {"goal"}}};
  if (auto it = known.find(name); it != known.end()) {
    for (const auto& [key, value] : params) {
      const auto& own = it->second;
      if (key != "max_steps" && key != "gamma" && std::find(own.begin(), own.end(), key) == own.end()) {
        throw SpecError("environment '" + name + "' has no parameter '" + key + "'");
      }
    }
  }
  EnvSpec spec;
  if (name == "tmaze") {
    spec = tmaze_spec(positive(get("corridor_length", 3), "corridor_length"), seed);
  } else if (name == "delayed_recall") {
    spec = delayed_recall_spec(positive(get("delay", 3), "delay"), seed);
  } else if (name == "two_room") {
    spec = two_room_spec(seed);
  } else if (name == "oracle_mdp") {
    spec = oracle_mdp_spec(seed);
  } else if (name == "toggle") {
    spec = toggle_spec(positive(get("length", 8), "length"), seed);
    if (params.count("first_bit")) spec.params["first_bit"] = params.at("first_bit") >= 0 ? 1.0 : -1.0;
  } else if (name == "gridworld") {
    spec = gridworld_spec(static_cast<int>(get("goal", 0)), seed);
  } else {
    throw SpecError("unknown environment '" + name + "'");
  }
  if (params.count("max_steps")) spec.max_steps = positive(params.at("max_steps"), "max_steps");
  if (params.count("gamma")) spec.params["gamma"] = params.at("gamma");
  spec.validate();
  return spec;
}

std::size_t decode_action(std::span<const double> out) {
  if (out.empty()) throw DimensionError("empty action vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i] > out[best]) best = i;
  }
  return best;
}

std::vector<double> one_hot(std::size_t index, std::size_t size) {
  if (index >= size) throw DimensionError("one-hot index out of range");
  std::vector<double> v(size, 0.0);
  v[index] = 1.0;
  return v;
}

Observation reset(const EnvSpec& spec, std::uint64_t trial_seed) {
  Observation o;
  o.state.key = splitmix64(splitmix64(spec.seed) ^ splitmix64(trial_seed + 0x632be59bd9b4e019ULL));
  o.r.assign(spec.dims.n, 0.0);
  auto& s = o.state;
  if (spec.name == "tmaze") {
    s.cue = (s.key >> 11) & 1 ? 1 : -1;
    o.in = tmaze_obs(spec, s);
  } else if (spec.name == "delayed_recall") {
    s.cue = (s.key >> 11) & 1 ? 1 : -1;
    o.in = delayed_recall_obs(spec, s);
  } else if (spec.name == "two_room") {
    s.position = kJunction;
    o.in = two_room_obs(s);
  } else if (spec.name == "oracle_mdp") {
    o.in = mdp_obs(s);
  } else if (spec.name == "toggle") {
    s.cue = spec.param("first_bit", 1) >= 0 ? 1 : -1;
    o.in = {1.0};
  } else if (spec.name == "gridworld") {
    o.in = grid_obs(s);
  } else {
    throw SpecError("unknown environment '" + spec.name + "'");
  }
  return o;
}

Transition step(const EnvSpec& spec, const EnvState& state, std::span<const double> action) {
  if (state.done) throw ContractError("step after the trial ended; call reset first");
  if (action.size() != spec.dims.o) {
    throw DimensionError("action has " + std::to_string(action.size()) + " components, expected " +
                         std::to_string(spec.dims.o));
  }
  const auto a = decode_action(action);
  Transition tr;
  tr.state = state;
  auto& s = tr.state;
  double reward = 0.0;

  if (spec.name == "tmaze") {
    const int L = static_cast<int>(spec.param("corridor_length", 1));
    if (s.position < L) {
      if (a == 0) ++s.position;
    } else if (a == 1 || a == 2) {
      const int arm = a == 1 ? 1 : -1;  // cue +1 means left
      reward = arm == s.cue ? 1.0 : -1.0;
      s.done = true;
    }
  } else if (spec.name == "delayed_recall") {
    const auto L = static_cast<std::size_t>(spec.param("delay", 1));
    if (s.step == L) {
      reward = (a == 1 ? 1 : -1) == s.cue ? 1.0 : -1.0;
      s.done = true;
    }
  } else if (spec.name == "two_room") {
    reward = kRoomStepCost;
    if (s.position == kJunction) {
      if (a == 0) {
        s.position = kRegularRoom;
        s.signal = -0.95 + 1.9 * static_cast<double>(splitmix64(s.key) >> 11) * 0x1.0p-53;
      } else if (a == 1) {
        s.position = kNoiseRoom;
        s.signal = noise_value(s.key, s.step);
      }
    } else if (s.position == kRegularRoom) {
      s.signal = 1.0 - 2.0 * s.signal * s.signal;
    } else {
      s.signal = noise_value(s.key, s.step);
    }
  } else if (spec.name == "oracle_mdp") {
    reward = kMdpReward[s.position][a];
    s.position = kMdpNext[s.position][a];
  } else if (spec.name == "toggle") {
    const int bit = (s.step % 2 == 0) ? s.cue : -s.cue;
    reward = (a == 1 ? 1 : -1) == bit ? 1.0 : -1.0;
  } else if (spec.name == "gridworld") {
    int x = s.position % kGrid, y = s.position / kGrid;
    if (a == 0) y = std::max(0, y - 1);
    if (a == 1) y = std::min(kGrid - 1, y + 1);
    if (a == 2) x = std::max(0, x - 1);
    if (a == 3) x = std::min(kGrid - 1, x + 1);
    s.position = y * kGrid + x;
    if (s.position == grid_goal(spec)) {
      reward = 1.0;
      s.done = true;
    } else {
      reward = kGridStepCost;
    }
  } else {
    throw SpecError("unknown environment '" + spec.name + "'");
  }

  ++s.step;
  if (!s.done && s.step >= spec.max_steps) {
    s.done = true;
    tr.truncated = spec.name != "toggle" && spec.name != "delayed_recall";
  }
  tr.done = s.done;
  tr.r.assign(spec.dims.n, 0.0);
  tr.r[0] = reward;
  if (spec.name == "tmaze") {
    tr.in = tmaze_obs(spec, s);
  } else if (spec.name == "delayed_recall") {
    tr.in = delayed_recall_obs(spec, s);
  } else if (spec.name == "two_room") {
    tr.in = two_room_obs(s);
  } else if (spec.name == "oracle_mdp") {
    tr.in = mdp_obs(s);
  } else if (spec.name == "toggle") {
    tr.in = {0.0};
  } else {
    tr.in = grid_obs(s);
  }
  return tr;
}

std::vector<std::pair<std::uint64_t, double>> latent_cases(const EnvSpec& spec) {
  if (spec.name == "tmaze" || spec.name == "delayed_recall") {
    std::vector<std::pair<std::uint64_t, double>> cases;
    bool seen_pos = false, seen_neg = false;
    for (std::uint64_t seed = 0; !(seen_pos && seen_neg); ++seed) {
      const int cue = reset(spec, seed).state.cue;
      if (cue > 0 && !seen_pos) {
        cases.push_back({seed, 0.5});
        seen_pos = true;
      } else if (cue < 0 && !seen_neg) {
        cases.push_back({seed, 0.5});
        seen_neg = true;
      }
    }
    return cases;
  }
  if (spec.name == "two_room" || spec.name == "oracle_mdp" || spec.name == "toggle" || spec.name == "gridworld") {
    return {{0, 1.0}};  // reward does not depend on the trial seed
  }
  throw SpecError("optimal_return: unsupported environment '" + spec.name + "'");
}

double optimal_return(const EnvSpec& spec) {
  const double gamma = spec.param("gamma", 1.0);
  std::function<double(const EnvState&, double)> best = [&](const EnvState& s, double discount) {
    double value = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < spec.dims.o; ++a) {
      const auto tr = step(spec, s, one_hot(a, spec.dims.o));
      double v = discount * tr.r[0];
      if (!tr.done) v += best(tr.state, discount * gamma);
      value = std::max(value, v);
    }
    return value;
  };
  double expected = 0.0;
  for (const auto& [seed, prob] : latent_cases(spec)) expected += prob * best(reset(spec, seed).state, 1.0);
  return expected;
}

}  // namespace cmrl

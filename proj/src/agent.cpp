#include "cmrl/agent.hpp"

#include "cmrl/errors.hpp"

namespace cmrl {

TrialTrace run_trial(const EnvSpec& env, std::uint64_t trial_seed, Agent& agent) {
  TrialTrace trace;
  auto obs = reset(env, trial_seed);
  EnvState state = obs.state;
  std::vector<double> in = std::move(obs.in);
  std::vector<double> r = std::move(obs.r);
  agent.begin();
  for (;;) {
    std::vector<double> sense(in);
    sense.insert(sense.end(), r.begin(), r.end());
    for (double v : r) trace.external_return += v;
    if (state.done) break;
    const auto a = agent.act(sense);
    if (a >= env.dims.o) throw ContractError("agent chose action " + std::to_string(a) + " out of range");
    auto out = one_hot(a, env.dims.o);
    auto tr = step(env, state, out);
    trace.records.push_back({trace.records.size() + 1, std::move(in), std::move(r), std::move(out), 0.0});
    state = tr.state;
    in = std::move(tr.in);
    r = std::move(tr.r);
    if (tr.done) {
      std::vector<double> final_sense(in);
      final_sense.insert(final_sense.end(), r.begin(), r.end());
      agent.end(final_sense, tr.truncated);
    }
  }
  trace.records.push_back(
      {trace.records.size() + 1, std::move(in), std::move(r), std::vector<double>(env.dims.o, 0.0), 0.0});
  return trace;
}

std::vector<double> markov_state(const WorldModel& model, std::span<const double> sense_t, const ModelState& prev) {
  if (sense_t.size() != model.dims().sense()) throw DimensionError("sense(t) does not match the model's m+n");
  if (prev.activations.size() != model.spec().unit_count()) throw DimensionError("model state does not match M");
  std::vector<double> s(sense_t.begin(), sense_t.end());
  for (auto u : model.spec().hidden()) s.push_back(prev.activations[u]);
  for (auto u : model.spec().outputs()) s.push_back(prev.activations[u]);
  return s;
}

std::vector<std::string> sense_keys(const Dims& dims) {
  std::vector<std::string> keys;
  for (std::size_t i = 0; i < dims.sense(); ++i) keys.push_back("s" + std::to_string(i));
  return keys;
}

std::vector<std::string> markov_keys(const WorldModel& model) {
  auto keys = sense_keys(model.dims());
  for (const auto& label : model.hidden_labels()) keys.push_back(label);
  for (std::size_t i = 0; i < model.dims().sense(); ++i) keys.push_back("p" + std::to_string(i));
  return keys;
}

void MarkovTracker::advance(std::span<const double> sense, std::size_t action) {
  std::vector<double> all(sense.begin(), sense.end());
  const auto a = one_hot(action, model_->dims().o);
  all.insert(all.end(), a.begin(), a.end());
  state_ = predict_step(*model_, state_, all).state;
}

}  // namespace cmrl

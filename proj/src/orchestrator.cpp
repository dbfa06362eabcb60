#include "cmrl/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <memory>
#include <ostream>

#include "cmrl/agent.hpp"
#include "cmrl/errors.hpp"
#include "cmrl/text_io.hpp"

namespace cmrl {

namespace {

std::vector<std::string> q_keys(const RunState& st) {
  return st.cfg.q_markov ? markov_keys(st.model) : sense_keys(st.env.dims);
}

std::size_t genome_length(const RunState& st) {
  return st.cfg.variant == Variant::C2 ? st.policy.genome_length() : st.cm.genome_length();
}

std::unique_ptr<Agent> genome_agent(const RunState& st, const std::vector<double>& genome) {
  if (st.cfg.variant == Variant::C2) return std::make_unique<PolicyAgent>(st.policy, genome, st.model);
  return std::make_unique<CMAgent>(st.cm, genome, st.model, st.cfg.think_k);
}

std::size_t record(RunState& st, const TrialTrace& trace) {
  st.history.begin_trial(st.env.name);
  const auto base = st.history.length();
  for (auto rec : trace.records) {
    rec.t += base;
    st.history.append(std::move(rec));
  }
  return st.history.end_trial().trial_id;
}

// Re-keys controllers whose inputs are named after M's hidden units.
void follow_model(RunState& st) {
  if (st.cfg.variant == Variant::C1) {
    st.q.remap(q_keys(st));
  } else if (st.cfg.variant == Variant::C2) {
    const auto next = rekey_policy(st.policy, markov_keys(st.model));
    for (auto& g : st.population) g.weights = remap_policy_genome(st.policy, g.weights, next);
    if (st.best.weights.size() == st.policy.genome_length()) {
      st.best.weights = remap_policy_genome(st.policy, st.best.weights, next);
    }
    st.policy = next;
  }
  // C3 addresses M's hidden units by ordinal modulo h; nothing to re-key.
}

struct LastDecision {
  std::vector<double> features;
  std::size_t action = 0;
};

}  // namespace

RunState init_run(const RunConfig& cfg) {
  cfg.validate();
  RunState st;
  st.cfg = cfg;
  st.streams = StreamSet(cfg.seed);
  st.env = make_env(cfg.env_name, cfg.env_params, derive_seed(cfg.seed, "env-spec"));
  st.history = HistoryStore(st.env.dims, cfg.seed);
  st.model = WorldModel::create(st.env.dims, cfg.model_hidden, cfg.coding, st.streams.stream("init"));
  st.sigma = cfg.evolution.sigma;
  switch (cfg.variant) {
    case Variant::C1:
      st.q = QFunction(st.env.dims.o, q_keys(st), cfg.q.gamma, cfg.q.alpha);
      break;
    case Variant::C2:
      st.policy = make_policy_net(markov_keys(st.model), cfg.policy_hidden, st.env.dims.o);
      break;
    case Variant::C3:
      st.cm = make_cm_spec(st.env.dims, st.model.hidden_size(), cfg.cm);
      break;
  }
  return st;
}

const PhaseReport& run_phase(RunState& st) {
  const auto started = std::chrono::steady_clock::now();
  const auto& cfg = st.cfg;
  PhaseReport report;
  report.phase = ++st.phase;

  // Controller phase: M is frozen.
  const auto frozen_hash = st.model.hash();
  std::vector<std::size_t> phase_trials;
  std::map<std::size_t, LastDecision> last_decisions;
  double phase_return = 0.0;

  if (cfg.variant == Variant::C1) {
    for (std::size_t k = 0; k < cfg.trials_per_phase; ++k) {
      const auto seed = st.streams.stream("env")();
      QAgent agent(st.q, cfg.q_markov ? &st.model : nullptr, st.env.dims, cfg.q, st.streams.stream("policy"),
                   st.q_steps, true);
      const auto trace = run_trial(st.env, seed, agent);
      const auto id = record(st, trace);
      phase_trials.push_back(id);
      last_decisions[id] = {agent.last_features(), agent.last_action()};
      phase_return += trace.external_return;
    }
    report.controller_metric = phase_return / static_cast<double>(cfg.trials_per_phase);
  } else {
    std::vector<std::uint64_t> eval_seeds(cfg.eval_trials);
    for (auto& s : eval_seeds) s = st.streams.stream("eval")();
    std::vector<Episode> replay;
    if (cfg.curiosity.enabled && st.history.trial_count() > 0) {
      const auto spans = st.history.sample_trials(cfg.probe_replay, ReplayRule::uniform_random, st.streams.stream("probe"));
      replay = episodes_of(st.history, spans);
    }
    const FitnessFn fitness = [&](const std::vector<double>& genome) {
      auto agent = genome_agent(st, genome);
      double total = 0.0;
      for (const auto seed : eval_seeds) {
        const auto trace = run_trial(st.env, seed, *agent);
        total += trace.external_return;
        if (cfg.curiosity.enabled) total += probe_intrinsic(st.model, trace.records, replay, cfg.curiosity, cfg.probe);
      }
      return total / static_cast<double>(eval_seeds.size());
    };
    if (st.population.empty()) {
      st.population = random_population(cfg.evolution.mu, genome_length(st), cfg.init_scale, st.streams.stream("init"));
    }
    // The step size restarts every phase. After a sleep M's hidden code can
    // shift, and a sigma that shrank while fitness sat at its maximum could
    // not follow it.
    auto result = evolve(st.population, fitness, cfg.evolution, st.streams.stream("evolution"));
    st.population = std::move(result.population);
    st.sigma = result.sigma;
    st.best = result.best;
    for (const auto& row : result.log) st.evolution_log.push_back({st.phase, row});
    report.controller_metric = st.best.fitness;

    auto agent = genome_agent(st, st.best.weights);
    for (std::size_t k = 0; k < cfg.trials_per_phase; ++k) {
      const auto trace = run_trial(st.env, st.streams.stream("env")(), *agent);
      phase_trials.push_back(record(st, trace));
      phase_return += trace.external_return;
    }
  }
  report.mean_return = phase_return / static_cast<double>(cfg.trials_per_phase);
  if (st.model.hash() != frozen_hash) throw ContractError("world model changed while it was frozen");

  // Sleep phase: replayed past trials plus everything from this phase.
  auto spans = st.history.sample_trials(cfg.replay_k, cfg.replay_rule, st.streams.stream("replay"));
  for (auto id : phase_trials) {
    if (std::none_of(spans.begin(), spans.end(), [&](const TrialSpan& s) { return s.trial_id == id; })) {
      spans.push_back(st.history.trial(id));
    }
  }
  std::sort(spans.begin(), spans.end(), [](const TrialSpan& a, const TrialSpan& b) { return a.trial_id < b.trial_id; });
  const WorldModel before = st.model;
  auto slept = sleep_train(st.model, st.history, spans, cfg.sleep);
  st.model = std::move(slept.model);
  report.diverged = slept.diverged;

  bool structure_changed = false;
  if (cfg.structure_every > 0 && st.phase % cfg.structure_every == 0) {
    const auto scoring = st.history.sample_trials(cfg.scoring_k, ReplayRule::always_include_latest,
                                                  st.streams.stream("replay"));
    const auto proposal = propose_structural_change(st.model, st.streams.stream("structure"), cfg.structure);
    SleepConfig retrain = cfg.sleep;
    retrain.epochs = cfg.retrain_epochs;
    auto verdict = accept_if_shorter(st.model, proposal.candidate, episodes_of(st.history, scoring), retrain);
    report.mutation = to_string(proposal.mutation);
    report.accepted = verdict.accepted;
    if (verdict.accepted) {
      st.model = std::move(verdict.model);
      structure_changed = true;
    }
  }

  // Curiosity: each trial of the phase earns what the sleep phase saved on it.
  for (auto id : phase_trials) {
    const TrialSpan one[] = {st.history.trial(id)};
    const auto pre = code_length(before, st.history, one);
    const auto post = code_length(st.model, st.history, one);
    const double reward = intrinsic_reward(pre, post, cfg.curiosity);
    st.history.credit_intrinsic(id, reward);
    st.curiosity_log.push_back({st.phase, id, pre.total, post.total, reward});
    report.intrinsic_total += reward;
    if (cfg.variant == Variant::C1 && reward != 0.0) {
      const auto& d = last_decisions.at(id);
      q_bonus(st.q, d.features, d.action, reward);
    }
  }
  if (structure_changed) follow_model(st);

  report.code = code_length(st.model, st.history, st.history.trials());
  report.hidden = st.model.hidden_size();
  report.model_hash = st.model.hash();
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  st.reports.push_back(report);
  if (stop_criterion_met(st)) st.stopped = true;
  return st.reports.back();
}

void run(RunState& st, std::optional<std::size_t> max_phase, const std::optional<std::filesystem::path>& out_dir) {
  while (!st.stopped && st.phase < st.cfg.phases && (!max_phase || st.phase < *max_phase)) {
    try {
      run_phase(st);
    } catch (...) {
      if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        st.history.save(*out_dir / "history.partial.txt");
      }
      throw;
    }
    if (out_dir) save_checkpoint(st, *out_dir);
  }
}

double recent_mean_return(const HistoryStore& history, std::size_t window) {
  const auto& trials = history.trials();
  if (trials.empty()) return 0.0;
  const std::size_t n = std::min(window, trials.size());
  double sum = 0.0;
  for (std::size_t i = trials.size() - n; i < trials.size(); ++i) sum += trials[i].external_return;
  return sum / static_cast<double>(n);
}

bool stop_criterion_met(const RunState& st) {
  if (!st.cfg.stop_on_optimal || st.history.trial_count() < st.cfg.stop_window) return false;
  const double optimal = optimal_return(st.env);
  return recent_mean_return(st.history, st.cfg.stop_window) >= st.cfg.stop_fraction * optimal;
}

EvalSummary evaluate_controller(const RunState& st, std::size_t trials, HistoryStore* trace) {
  EvalSummary summary;
  summary.trials = trials;
  summary.optimal = optimal_return(st.env);
  std::unique_ptr<Agent> agent;
  QFunction q = st.q;
  std::size_t steps = 0;
  Rng unused(0);
  if (st.cfg.variant == Variant::C1) {
    agent = std::make_unique<QAgent>(q, st.cfg.q_markov ? &st.model : nullptr, st.env.dims, st.cfg.q, unused, steps,
                                     false);
  } else {
    if (st.best.weights.size() != genome_length(st)) throw ContractError("no evolved controller to evaluate");
    agent = genome_agent(st, st.best.weights);
  }
  const auto base = derive_seed(st.cfg.seed, "evaluation");
  double total = 0.0;
  for (std::size_t i = 0; i < trials; ++i) {
    const auto result = run_trial(st.env, splitmix64(base + i), *agent);
    total += result.external_return;
    if (trace) {
      trace->begin_trial(st.env.name);
      const auto offset = trace->length();
      for (auto rec : result.records) {
        rec.t += offset;
        trace->append(std::move(rec));
      }
      trace->end_trial();
    }
  }
  summary.mean_return = trials ? total / static_cast<double>(trials) : 0.0;
  return summary;
}

void export_metrics(const RunState& st, MetricsTable table, std::ostream& out) {
  using text::format_real;
  switch (table) {
    case MetricsTable::trials:
      st.history.export_returns(out);
      break;
    case MetricsTable::phases:
      out << "phase,controller_metric,mean_return,E,bits_M,bits_H,total,intrinsic_total,hidden,mutation,accepted,"
             "diverged,seconds\n";
      for (const auto& r : st.reports) {
        out << r.phase << ',' << format_real(r.controller_metric) << ',' << format_real(r.mean_return) << ','
            << format_real(r.code.E) << ',' << format_real(r.code.bits_M) << ',' << format_real(r.code.bits_H) << ','
            << format_real(r.code.total) << ',' << format_real(r.intrinsic_total) << ',' << r.hidden << ','
            << r.mutation << ',' << (r.accepted ? 1 : 0) << ',' << (r.diverged ? 1 : 0) << ','
            << format_real(r.seconds) << '\n';
      }
      break;
    case MetricsTable::evolution:
      out << "phase,generation,best_fitness,mean_fitness\n";
      for (const auto& r : st.evolution_log) {
        out << r.phase << ',' << r.log.generation << ',' << format_real(r.log.best) << ',' << format_real(r.log.mean)
            << '\n';
      }
      break;
    case MetricsTable::curiosity:
      out << "phase,trial_id,bits_before,bits_after,intrinsic\n";
      for (const auto& r : st.curiosity_log) {
        out << r.phase << ',' << r.trial_id << ',' << format_real(r.bits_before) << ',' << format_real(r.bits_after)
            << ',' << format_real(r.intrinsic) << '\n';
      }
      break;
  }
}

}  // namespace cmrl

#include "cmrl/config.hpp"

#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <vector>

#include "cmrl/environments.hpp"
#include "cmrl/errors.hpp"
#include "cmrl/text_io.hpp"

namespace cmrl {

const char* to_string(Variant variant) {
  switch (variant) {
    case Variant::C1: return "C1";
    case Variant::C2: return "C2";
    case Variant::C3: return "C3";
  }
  return "?";
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw FormatError("expected true or false, got '" + v + "'");
}

std::string show(bool v) { return v ? "true" : "false"; }
std::string show(double v) { return text::format_real(v); }
std::string show(std::size_t v) { return std::to_string(v); }

struct Option {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

Option size_opt(std::string key, std::function<std::size_t&(RunConfig&)> ref) {
  return {key, [ref](RunConfig& c, const std::string& v) { ref(c) = static_cast<std::size_t>(text::parse_uint(v)); },
          [ref](const RunConfig& c) { return show(ref(const_cast<RunConfig&>(c))); }};
}

Option real_opt(std::string key, std::function<double&(RunConfig&)> ref) {
  return {key, [ref](RunConfig& c, const std::string& v) { ref(c) = text::parse_real(v); },
          [ref](const RunConfig& c) { return show(ref(const_cast<RunConfig&>(c))); }};
}

Option bool_opt(std::string key, std::function<bool&(RunConfig&)> ref) {
  return {key, [ref](RunConfig& c, const std::string& v) { ref(c) = parse_bool(v); },
          [ref](const RunConfig& c) { return show(ref(const_cast<RunConfig&>(c))); }};
}

const std::vector<Option>& options() {
  static const std::vector<Option> table = [] {
    std::vector<Option> t;
    t.push_back(size_opt("run.phases", [](RunConfig& c) -> auto& { return c.phases; }));
    t.push_back(size_opt("run.trials_per_phase", [](RunConfig& c) -> auto& { return c.trials_per_phase; }));
    t.push_back({"run.seed", [](RunConfig& c, const std::string& v) { c.seed = text::parse_uint(v); },
                 [](const RunConfig& c) { return std::to_string(c.seed); }});
    t.push_back(size_opt("run.think_k", [](RunConfig& c) -> auto& { return c.think_k; }));
    t.push_back(bool_opt("run.stop_on_optimal", [](RunConfig& c) -> auto& { return c.stop_on_optimal; }));
    t.push_back(real_opt("run.stop_fraction", [](RunConfig& c) -> auto& { return c.stop_fraction; }));
    t.push_back(size_opt("run.stop_window", [](RunConfig& c) -> auto& { return c.stop_window; }));

    t.push_back({"env.name", [](RunConfig& c, const std::string& v) { c.env_name = v; },
                 [](const RunConfig& c) { return c.env_name; }});

    t.push_back({"controller.variant",
                 [](RunConfig& c, const std::string& v) {
                   if (v == "C1") {
                     c.variant = Variant::C1;
                   } else if (v == "C2") {
                     c.variant = Variant::C2;
                   } else if (v == "C3") {
                     c.variant = Variant::C3;
                   } else {
                     throw FormatError("controller.variant must be C1, C2 or C3");
                   }
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.variant)); }});
    t.push_back({"controller.q_features",
                 [](RunConfig& c, const std::string& v) {
                   if (v != "markov" && v != "sense") throw FormatError("controller.q_features must be markov or sense");
                   c.q_markov = v == "markov";
                 },
                 [](const RunConfig& c) { return std::string(c.q_markov ? "markov" : "sense"); }});
    t.push_back(size_opt("controller.c_hidden", [](RunConfig& c) -> auto& { return c.cm.c_hidden; }));
    t.push_back(bool_opt("controller.c_recurrent", [](RunConfig& c) -> auto& { return c.cm.c_recurrent; }));
    t.push_back(size_opt("controller.interface_width", [](RunConfig& c) -> auto& { return c.cm.interface_width; }));
    t.push_back(
        bool_opt("controller.multiplicative_out", [](RunConfig& c) -> auto& { return c.cm.multiplicative_out; }));
    t.push_back(bool_opt("controller.gate", [](RunConfig& c) -> auto& { return c.cm.gate_enabled; }));
    t.push_back(
        bool_opt("controller.freeze_interface_in", [](RunConfig& c) -> auto& { return c.cm.freeze_interface_in; }));
    t.push_back(size_opt("controller.policy_hidden", [](RunConfig& c) -> auto& { return c.policy_hidden; }));
    t.push_back(size_opt("controller.eval_trials", [](RunConfig& c) -> auto& { return c.eval_trials; }));
    t.push_back(real_opt("controller.init_scale", [](RunConfig& c) -> auto& { return c.init_scale; }));

    t.push_back(size_opt("model.hidden", [](RunConfig& c) -> auto& { return c.model_hidden; }));
    t.push_back(size_opt("model.epochs", [](RunConfig& c) -> auto& { return c.sleep.epochs; }));
    t.push_back(real_opt("model.lr", [](RunConfig& c) -> auto& { return c.sleep.learning_rate; }));
    t.push_back(real_opt("model.l2", [](RunConfig& c) -> auto& { return c.sleep.l2; }));
    t.push_back(real_opt("model.grad_clip", [](RunConfig& c) -> auto& { return c.sleep.grad_clip; }));
    t.push_back(size_opt("model.replay_k", [](RunConfig& c) -> auto& { return c.replay_k; }));
    t.push_back({"model.replay_rule",
                 [](RunConfig& c, const std::string& v) {
                   if (v == "uniform_random") {
                     c.replay_rule = ReplayRule::uniform_random;
                   } else if (v == "always_include_latest") {
                     c.replay_rule = ReplayRule::always_include_latest;
                   } else {
                     throw FormatError("model.replay_rule must be uniform_random or always_include_latest");
                   }
                 },
                 [](const RunConfig& c) {
                   return std::string(c.replay_rule == ReplayRule::uniform_random ? "uniform_random"
                                                                                  : "always_include_latest");
                 }});
    t.push_back(size_opt("model.structure_every", [](RunConfig& c) -> auto& { return c.structure_every; }));
    t.push_back(size_opt("model.retrain_epochs", [](RunConfig& c) -> auto& { return c.retrain_epochs; }));
    t.push_back(size_opt("model.scoring_k", [](RunConfig& c) -> auto& { return c.scoring_k; }));
    t.push_back(real_opt("model.init_scale", [](RunConfig& c) -> auto& { return c.structure.init_scale; }));
    t.push_back(
        real_opt("model.fanin_probability", [](RunConfig& c) -> auto& { return c.structure.fanin_probability; }));
    t.push_back(
        real_opt("model.small_unit_threshold", [](RunConfig& c) -> auto& { return c.structure.small_unit_threshold; }));

    t.push_back(real_opt("coding.sigma_e", [](RunConfig& c) -> auto& { return c.coding.sigma_e; }));
    t.push_back(real_opt("coding.delta_e", [](RunConfig& c) -> auto& { return c.coding.delta_e; }));
    t.push_back({"coding.weight_coding",
                 [](RunConfig& c, const std::string& v) {
                   if (v == "gaussian") {
                     c.coding.weight_coding = WeightCoding::gaussian;
                   } else if (v == "count_based") {
                     c.coding.weight_coding = WeightCoding::count_based;
                   } else {
                     throw FormatError("coding.weight_coding must be gaussian or count_based");
                   }
                 },
                 [](const RunConfig& c) {
                   return std::string(c.coding.weight_coding == WeightCoding::gaussian ? "gaussian" : "count_based");
                 }});
    t.push_back(real_opt("coding.sigma_w", [](RunConfig& c) -> auto& { return c.coding.sigma_w; }));
    t.push_back(real_opt("coding.delta_w", [](RunConfig& c) -> auto& { return c.coding.delta_w; }));
    t.push_back({"coding.bits_per_weight",
                 [](RunConfig& c, const std::string& v) { c.coding.bits_per_weight = static_cast<int>(text::parse_int(v)); },
                 [](const RunConfig& c) { return std::to_string(c.coding.bits_per_weight); }});
    t.push_back(
        real_opt("coding.zero_weight_threshold", [](RunConfig& c) -> auto& { return c.coding.zero_weight_threshold; }));

    t.push_back(size_opt("evolution.mu", [](RunConfig& c) -> auto& { return c.evolution.mu; }));
    t.push_back(size_opt("evolution.lambda", [](RunConfig& c) -> auto& { return c.evolution.lambda; }));
    t.push_back(real_opt("evolution.sigma", [](RunConfig& c) -> auto& { return c.evolution.sigma; }));
    t.push_back(size_opt("evolution.generations", [](RunConfig& c) -> auto& { return c.evolution.generations; }));
    t.push_back(bool_opt("evolution.adapt_sigma", [](RunConfig& c) -> auto& { return c.evolution.adapt_sigma; }));
    t.push_back(real_opt("evolution.sigma_min", [](RunConfig& c) -> auto& { return c.evolution.sigma_min; }));
    t.push_back(real_opt("evolution.sigma_max", [](RunConfig& c) -> auto& { return c.evolution.sigma_max; }));

    t.push_back(real_opt("q.alpha", [](RunConfig& c) -> auto& { return c.q.alpha; }));
    t.push_back(real_opt("q.gamma", [](RunConfig& c) -> auto& { return c.q.gamma; }));
    t.push_back(real_opt("q.epsilon_start", [](RunConfig& c) -> auto& { return c.q.epsilon_start; }));
    t.push_back(real_opt("q.epsilon_end", [](RunConfig& c) -> auto& { return c.q.epsilon_end; }));
    t.push_back(size_opt("q.epsilon_decay_steps", [](RunConfig& c) -> auto& { return c.q.epsilon_decay_steps; }));

    t.push_back(bool_opt("curiosity.enabled", [](RunConfig& c) -> auto& { return c.curiosity.enabled; }));
    t.push_back(real_opt("curiosity.eta", [](RunConfig& c) -> auto& { return c.curiosity.eta; }));
    t.push_back(bool_opt("curiosity.clip_negative", [](RunConfig& c) -> auto& { return c.curiosity.clip_negative; }));
    t.push_back(size_opt("curiosity.probe_epochs", [](RunConfig& c) -> auto& { return c.probe.epochs; }));
    t.push_back(real_opt("curiosity.probe_lr", [](RunConfig& c) -> auto& { return c.probe.learning_rate; }));
    t.push_back(size_opt("curiosity.probe_replay", [](RunConfig& c) -> auto& { return c.probe_replay; }));
    return t;
  }();
  return table;
}

}  // namespace

void RunConfig::validate() const {
  if (phases < 1) throw SpecError("run.phases must be >= 1");
  if (trials_per_phase < 1) throw SpecError("run.trials_per_phase must be >= 1");
  if (!(stop_fraction > 0 && stop_fraction <= 1)) throw SpecError("run.stop_fraction must be in (0, 1]");
  if (stop_window < 1) throw SpecError("run.stop_window must be >= 1");
  if (model_hidden < 1) throw SpecError("model.hidden must be >= 1");
  if (!(sleep.learning_rate > 0) || !(probe.learning_rate > 0)) throw SpecError("learning rates must be positive");
  if (!(sleep.l2 >= 0)) throw SpecError("model.l2 must be >= 0");
  if (eval_trials < 1) throw SpecError("controller.eval_trials must be >= 1");
  try {
    coding.validate();
    evolution.validate();
    q.validate();
    curiosity.validate();
  } catch (const std::invalid_argument& e) {
    throw SpecError(e.what());
  }
  make_env(env_name, env_params, 0);
}

void set_option(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& opt : options()) {
    if (opt.key == key) {
      opt.set(cfg, value);
      return;
    }
  }
  if (key.rfind("env.", 0) == 0 && key.size() > 4) {
    cfg.env_params[key.substr(4)] = text::parse_real(value);
    return;
  }
  throw FormatError("unknown configuration key '" + key + "'");
}

RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const auto body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw FormatError("config line " + std::to_string(line_no) + ": expected key = value");
    try {
      set_option(cfg, trim(std::string_view(body).substr(0, eq)), trim(std::string_view(body).substr(eq + 1)));
    } catch (const FormatError& e) {
      throw FormatError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config " + path.string());
  return parse_config(in);
}

void write_config(std::ostream& out, const RunConfig& cfg) {
  for (const auto& opt : options()) out << opt.key << " = " << opt.get(cfg) << '\n';
  for (const auto& [k, v] : cfg.env_params) out << "env." << k << " = " << text::format_real(v) << '\n';
}

}  // namespace cmrl

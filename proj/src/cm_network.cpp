#include "cmrl/cm_network.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>
#include <tuple>

#include "cmrl/errors.hpp"
#include "cmrl/text_io.hpp"

namespace cmrl {

using nn::Activation;
using nn::Combine;
using nn::UnitKind;

std::size_t CMSpec::genome_length() const {
  return static_cast<std::size_t>(std::count(frozen.begin(), frozen.end(), 0));
}

CMSpec make_cm_spec(const Dims& dims, std::size_t m_hidden, const CMConfig& cfg) {
  if (m_hidden == 0) throw DimensionError("the world model has no hidden units to interface with");
  std::vector<nn::UnitSpec> units;
  std::vector<nn::LinkSpec> links;
  std::size_t w = 0;
  auto link = [&](std::size_t s, std::size_t t, int delay) {
    links.push_back({s, t, w++, 1.0, delay, Combine::additive});
  };
  for (std::size_t i = 0; i < dims.sense(); ++i) {
    units.push_back({UnitKind::input, Activation::identity, Combine::additive, "s" + std::to_string(i)});
  }
  const std::size_t bias = units.size();
  units.push_back({UnitKind::bias, Activation::identity, Combine::additive, "bias"});
  const std::size_t first_hidden = units.size();
  for (std::size_t j = 0; j < cfg.c_hidden; ++j) {
    units.push_back({UnitKind::hidden, Activation::tanh, Combine::additive, "c" + std::to_string(j)});
  }
  const std::size_t first_action = units.size();
  for (std::size_t a = 0; a < dims.o; ++a) {
    units.push_back({UnitKind::output, Activation::identity, Combine::additive, "a" + std::to_string(a)});
  }
  const std::size_t gate = units.size();
  units.push_back({UnitKind::output, Activation::sigmoid, Combine::additive, "gate"});

  for (std::size_t j = 0; j < cfg.c_hidden; ++j) {
    for (std::size_t i = 0; i <= bias; ++i) link(i, first_hidden + j, 0);
    if (cfg.c_recurrent) {
      for (std::size_t k = 0; k < cfg.c_hidden; ++k) link(first_hidden + k, first_hidden + j, 1);
    }
  }
  for (std::size_t t = first_action; t <= gate; ++t) {
    for (std::size_t i = 0; i <= bias; ++i) link(i, t, 0);
    for (std::size_t j = 0; j < cfg.c_hidden; ++j) link(first_hidden + j, t, 0);
  }

  CMSpec cm;
  cm.c_spec = nn::NetSpec(std::move(units), std::move(links), w);
  for (std::size_t a = 0; a < dims.o; ++a) cm.action_units.push_back(first_action + a);
  cm.gate_unit = gate;
  cm.gate_enabled = cfg.gate_enabled;
  cm.multiplicative_out = cfg.multiplicative_out;
  const std::size_t width = std::min(cfg.interface_width, m_hidden);
  if (cfg.c_hidden > 0) {
    for (std::size_t i = 0; i < width; ++i) {
      cm.interface_out.push_back({first_hidden + i % cfg.c_hidden, i});
      cm.interface_in.push_back({first_hidden + i % cfg.c_hidden, i});
    }
  } else {
    for (std::size_t i = 0; i < width; ++i) cm.interface_in.push_back({first_action + i % dims.o, i});
  }
  cm.frozen.assign(cm.slot_count(), 0);
  cm.frozen_values.assign(cm.slot_count(), 0.0);
  if (cfg.freeze_interface_in) {
    for (std::size_t k = cm.slot_count() - cm.interface_in.size(); k < cm.slot_count(); ++k) cm.frozen[k] = 1;
  }
  return cm;
}

CMWeights expand_genome(const CMSpec& cm, std::span<const double> genome) {
  if (genome.size() != cm.genome_length()) {
    throw DimensionError("genome has " + std::to_string(genome.size()) + " weights, the controller needs " +
                         std::to_string(cm.genome_length()));
  }
  std::vector<double> slots(cm.slot_count());
  std::size_t g = 0;
  for (std::size_t k = 0; k < slots.size(); ++k) slots[k] = cm.frozen[k] ? cm.frozen_values[k] : genome[g++];
  CMWeights w;
  const auto nc = cm.c_spec.weight_count();
  const auto no = cm.interface_out.size();
  w.c.weights.assign(slots.begin(), slots.begin() + static_cast<std::ptrdiff_t>(nc));
  w.out.assign(slots.begin() + static_cast<std::ptrdiff_t>(nc), slots.begin() + static_cast<std::ptrdiff_t>(nc + no));
  w.in.assign(slots.begin() + static_cast<std::ptrdiff_t>(nc + no), slots.end());
  return w;
}

CMState cm_reset(const CMSpec& cm, const WorldModel& model) {
  return {std::vector<double>(cm.c_spec.unit_count(), 0.0), reset_state(model)};
}

namespace {

CMStep joint_step(const CMSpec& cm, const CMWeights& w, const WorldModel& model, const CMState& state,
                  std::span<const double> sense_t, bool execute) {
  const auto& dims = model.dims();
  if (sense_t.size() != dims.sense()) throw DimensionError("sense(t) does not match the run's m+n");
  if (state.c.size() != cm.c_spec.unit_count()) throw DimensionError("C state does not match the controller");
  const auto& m_hidden = model.spec().hidden();
  const std::size_t h = m_hidden.size();

  CMStep step;
  if (cm.interface_in.empty()) {
    step.state.c = nn::forward_step(cm.c_spec, w.c, state.c, sense_t);
  } else {
    nn::NetInjection inj(cm.c_spec.unit_count());
    for (std::size_t k = 0; k < cm.interface_in.size(); ++k) {
      const auto& l = cm.interface_in[k];
      inj.add[l.c_unit] += w.in[k] * state.m.activations[m_hidden[l.m_ordinal % h]];
    }
    step.state.c = nn::forward_step(cm.c_spec, w.c, state.c, sense_t, &inj);
  }
  const auto& c = step.state.c;
  for (auto u : cm.action_units) step.out.push_back(c[u]);
  step.action = decode_action(step.out);
  step.gate = cm.gate_enabled ? c[cm.gate_unit] : 1.0;

  std::vector<double> all(sense_t.begin(), sense_t.end());
  all.resize(dims.all(), 0.0);
  if (execute) all[dims.sense() + step.action] = 1.0;
  if (cm.gate_enabled) {
    for (auto& v : all) v *= step.gate;
  }
  if (cm.interface_out.empty()) {
    step.state.m = predict_step(model, state.m, all).state;
  } else {
    nn::NetInjection inj(model.spec().unit_count());
    for (std::size_t k = 0; k < cm.interface_out.size(); ++k) {
      const auto& l = cm.interface_out[k];
      const auto target = m_hidden[l.m_ordinal % h];
      if (cm.multiplicative_out) {
        inj.gain[target] *= w.out[k] * c[l.c_unit];
      } else {
        inj.add[target] += w.out[k] * c[l.c_unit];
      }
    }
    step.state.m = predict_step(model, state.m, all, &inj).state;
  }
  return step;
}

}  // namespace

CMStep cm_forward(const CMSpec& cm, const CMWeights& w, const WorldModel& model, const CMState& state,
                  std::span<const double> sense_t) {
  return joint_step(cm, w, model, state, sense_t, true);
}

CMStep cm_forward(const CMSpec& cm, std::span<const double> genome, const WorldModel& model, const CMState& state,
                  std::span<const double> sense_t) {
  return cm_forward(cm, expand_genome(cm, genome), model, state, sense_t);
}

CMState think_steps(const CMSpec& cm, const CMWeights& w, const WorldModel& model, std::size_t k,
                    const CMState& state, std::span<const double> last_sense) {
  CMState s = state;
  for (std::size_t i = 0; i < k; ++i) s = joint_step(cm, w, model, s, last_sense, false).state;
  return s;
}

CMState think_steps(const CMSpec& cm, std::span<const double> genome, const WorldModel& model, std::size_t k,
                    const CMState& state, std::span<const double> last_sense) {
  return think_steps(cm, expand_genome(cm, genome), model, k, state, last_sense);
}

std::pair<CMSpec, std::vector<double>> freeze_and_grow(const CMSpec& cm, std::span<const double> genome,
                                                       std::size_t extra_units, std::size_t extra_links) {
  const auto w = expand_genome(cm, genome);
  auto units = cm.c_spec.units();
  auto links = cm.c_spec.links();
  std::size_t nw = cm.c_spec.weight_count();
  const std::size_t old_nw = nw;
  auto link = [&](std::size_t s, std::size_t t, int delay) { links.push_back({s, t, nw++, 1.0, delay, Combine::additive}); };

  const auto& inputs = cm.c_spec.inputs();
  const auto& biases = cm.c_spec.biases();
  std::size_t grown = 0;
  for (const auto& u : units) {
    if (u.label.size() > 1 && u.label[0] == 'g') ++grown;
  }
  for (std::size_t k = 0; k < extra_units; ++k) {
    const std::size_t g = units.size();
    units.push_back({UnitKind::hidden, Activation::tanh, Combine::additive, "g" + std::to_string(grown + k)});
    for (auto i : inputs) link(i, g, 0);
    for (auto b : biases) link(b, g, 0);
    for (auto a : cm.action_units) link(g, a, 0);
    link(g, g, 1);
  }

  if (extra_links > 0) {
    std::set<std::tuple<std::size_t, std::size_t, int>> existing;
    for (const auto& l : links) existing.insert({l.source, l.target, l.delay});
    std::vector<std::size_t> hidden;
    for (std::size_t u = 0; u < units.size(); ++u) {
      if (units[u].kind == UnitKind::hidden && units[u].net == Combine::additive) hidden.push_back(u);
    }
    std::vector<std::tuple<std::size_t, std::size_t, int>> candidates;
    for (auto h : hidden) {
      for (auto a : cm.action_units) candidates.push_back({h, a, 0});
    }
    for (auto i : inputs) {
      for (auto h : hidden) candidates.push_back({i, h, 0});
    }
    for (auto s : hidden) {
      for (auto t : hidden) candidates.push_back({s, t, 1});
    }
    std::size_t added = 0;
    for (const auto& c : candidates) {
      if (added == extra_links) break;
      if (existing.count(c)) continue;
      link(std::get<0>(c), std::get<1>(c), std::get<2>(c));
      existing.insert(c);
      ++added;
    }
  }

  CMSpec out = cm;
  out.c_spec = nn::NetSpec(std::move(units), std::move(links), nw);
  out.frozen.clear();
  out.frozen_values.clear();
  for (std::size_t k = 0; k < old_nw; ++k) {
    out.frozen.push_back(1);
    out.frozen_values.push_back(w.c.weights[k]);
  }
  for (std::size_t k = old_nw; k < nw; ++k) {
    out.frozen.push_back(0);
    out.frozen_values.push_back(0.0);
  }
  for (double v : w.out) {
    out.frozen.push_back(1);
    out.frozen_values.push_back(v);
  }
  for (double v : w.in) {
    out.frozen.push_back(1);
    out.frozen_values.push_back(v);
  }
  return {std::move(out), std::vector<double>(nw - old_nw, 0.0)};
}

CMAgent::CMAgent(const CMSpec& cm, std::span<const double> genome, const WorldModel& model, std::size_t think_k)
    : cm_(&cm), weights_(expand_genome(cm, genome)), model_(&model), think_k_(think_k), state_(cm_reset(cm, model)) {}

void CMAgent::begin() { state_ = cm_reset(*cm_, *model_); }

std::size_t CMAgent::act(std::span<const double> sense) {
  if (think_k_ > 0) state_ = think_steps(*cm_, weights_, *model_, think_k_, state_, sense);
  auto step = cm_forward(*cm_, weights_, *model_, state_, sense);
  state_ = std::move(step.state);
  return step.action;
}

namespace {

void write_links(std::ostream& out, const char* tag, const std::vector<InterfaceLink>& links) {
  out << tag << ',' << links.size();
  for (const auto& l : links) out << ',' << l.c_unit << ',' << l.m_ordinal;
  out << '\n';
}

std::vector<InterfaceLink> read_links(std::istream& in, std::string_view tag) {
  auto f = text::split_owned(text::expect_line(in, tag));
  if (f.size() < 2 || f[0] != tag) throw FormatError("expected " + std::string(tag) + " line");
  const auto n = static_cast<std::size_t>(text::parse_uint(f[1]));
  if (f.size() != 2 + 2 * n) throw FormatError("bad " + std::string(tag) + " line");
  std::vector<InterfaceLink> links(n);
  for (std::size_t i = 0; i < n; ++i) {
    links[i].c_unit = static_cast<std::size_t>(text::parse_uint(f[2 + 2 * i]));
    links[i].m_ordinal = static_cast<std::size_t>(text::parse_uint(f[3 + 2 * i]));
  }
  return links;
}

}  // namespace

void write_cm(std::ostream& out, const CMSpec& cm) {
  out << "cm," << cm.gate_unit << ',' << (cm.gate_enabled ? 1 : 0) << ',' << (cm.multiplicative_out ? 1 : 0) << '\n';
  out << "actions," << cm.action_units.size();
  for (auto a : cm.action_units) out << ',' << a;
  out << '\n';
  write_links(out, "interface_out", cm.interface_out);
  write_links(out, "interface_in", cm.interface_in);
  out << "frozen," << cm.slot_count();
  for (char f : cm.frozen) out << ',' << (f ? 1 : 0);
  out << '\n';
  std::string line = "values," + std::to_string(cm.slot_count());
  text::append_reals(line, cm.frozen_values);
  out << line << '\n';
  nn::NetParams placeholder{std::vector<double>(cm.c_spec.weight_count(), 0.0)};
  nn::write_net(out, cm.c_spec, placeholder);
}

CMSpec read_cm(std::istream& in) {
  CMSpec cm;
  auto h = text::split_owned(text::expect_line(in, "controller header"));
  if (h.size() != 4 || h[0] != "cm") throw FormatError("bad controller header");
  cm.gate_unit = static_cast<std::size_t>(text::parse_uint(h[1]));
  cm.gate_enabled = h[2] == "1";
  cm.multiplicative_out = h[3] == "1";
  auto a = text::split_owned(text::expect_line(in, "actions"));
  if (a.size() < 2 || a[0] != "actions" || a.size() != 2 + text::parse_uint(a[1])) throw FormatError("bad actions line");
  for (std::size_t i = 2; i < a.size(); ++i) cm.action_units.push_back(static_cast<std::size_t>(text::parse_uint(a[i])));
  cm.interface_out = read_links(in, "interface_out");
  cm.interface_in = read_links(in, "interface_in");
  auto f = text::split_owned(text::expect_line(in, "frozen"));
  if (f.size() < 2 || f[0] != "frozen" || f.size() != 2 + text::parse_uint(f[1])) throw FormatError("bad frozen line");
  for (std::size_t i = 2; i < f.size(); ++i) cm.frozen.push_back(f[i] == "1" ? 1 : 0);
  auto v = text::split_owned(text::expect_line(in, "values"));
  if (v.size() < 2 || v[0] != "values") throw FormatError("bad values line");
  cm.frozen_values = text::parse_reals(v, 2, static_cast<std::size_t>(text::parse_uint(v[1])));
  cm.c_spec = nn::read_net(in).first;
  if (cm.frozen.size() != cm.slot_count() || cm.frozen_values.size() != cm.slot_count()) {
    throw FormatError("controller slot count does not match its network");
  }
  for (auto u : cm.action_units) {
    if (u >= cm.c_spec.unit_count()) throw FormatError("action unit out of range");
  }
  if (cm.gate_unit >= cm.c_spec.unit_count()) throw FormatError("gate unit out of range");
  return cm;
}

}  // namespace cmrl

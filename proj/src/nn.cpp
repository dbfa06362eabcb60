#include "cmrl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <queue>
#include <sstream>
#include <tuple>

#include "cmrl/errors.hpp"
#include "cmrl/text_io.hpp"

namespace cmrl::nn {

const char* to_string(UnitKind kind) {
  switch (kind) {
    case UnitKind::input: return "input";
    case UnitKind::hidden: return "hidden";
    case UnitKind::output: return "output";
    case UnitKind::bias: return "bias";
  }
  return "?";
}

const char* to_string(Activation act) {
  switch (act) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
  }
  return "?";
}

const char* to_string(Combine combine) {
  return combine == Combine::additive ? "additive" : "multiplicative";
}

namespace {

UnitKind parse_kind(std::string_view s) {
  if (s == "input") return UnitKind::input;
  if (s == "hidden") return UnitKind::hidden;
  if (s == "output") return UnitKind::output;
  if (s == "bias") return UnitKind::bias;
  throw FormatError("unknown unit kind '" + std::string(s) + "'");
}

Activation parse_activation(std::string_view s) {
  if (s == "identity") return Activation::identity;
  if (s == "tanh") return Activation::tanh;
  if (s == "sigmoid") return Activation::sigmoid;
  throw FormatError("unknown activation '" + std::string(s) + "'");
}

Combine parse_combine(std::string_view s) {
  if (s == "additive") return Combine::additive;
  if (s == "multiplicative") return Combine::multiplicative;
  throw FormatError("unknown combine '" + std::string(s) + "'");
}

double activate(Activation act, double net) {
  switch (act) {
    case Activation::identity: return net;
    case Activation::tanh: return std::tanh(net);
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-net));
  }
  return net;
}

// Derivative expressed through the activation value itself.
double activation_slope(Activation act, double value) {
  switch (act) {
    case Activation::identity: return 1.0;
    case Activation::tanh: return 1.0 - value * value;
    case Activation::sigmoid: return value * (1.0 - value);
  }
  return 1.0;
}

double link_weight(const LinkSpec& link, const NetParams& params) {
  return link.learnable() ? params.weights[link.weight] : link.fixed_value;
}

double source_value(const LinkSpec& link, std::span<const double> current, std::span<const double> prev) {
  return link.delay == 0 ? current[link.source] : prev[link.source];
}

}  // namespace

NetSpec::NetSpec(std::vector<UnitSpec> units, std::vector<LinkSpec> links, std::size_t weight_count)
    : units_(std::move(units)), links_(std::move(links)), weight_count_(weight_count) {
  const std::size_t n = units_.size();
  for (std::size_t u = 0; u < n; ++u) {
    const auto& unit = units_[u];
    if (unit.label.find_first_of(",\n\r") != std::string::npos) {
      throw SpecError("unit " + std::to_string(u) + " label contains a separator");
    }
    switch (unit.kind) {
      case UnitKind::input: inputs_.push_back(u); break;
      case UnitKind::output: outputs_.push_back(u); break;
      case UnitKind::hidden: hidden_.push_back(u); break;
      case UnitKind::bias: biases_.push_back(u); break;
    }
  }

  std::vector<bool> referenced(weight_count_, false);
  std::vector<std::size_t> in_count(n, 0);
  for (std::size_t l = 0; l < links_.size(); ++l) {
    const auto& link = links_[l];
    const std::string where = "link " + std::to_string(l);
    if (link.source >= n || link.target >= n) throw SpecError(where + " references a missing unit");
    if (link.delay != 0 && link.delay != 1) throw SpecError(where + " has delay other than 0 or 1");
    const auto& target = units_[link.target];
    if (target.kind == UnitKind::input) throw SpecError(where + " enters input unit " + std::to_string(link.target));
    if (target.kind == UnitKind::bias) throw SpecError(where + " enters bias unit " + std::to_string(link.target));
    if (target.net == Combine::multiplicative && link.combine != Combine::multiplicative) {
      throw SpecError(where + " is additive but enters multiplicative unit " + std::to_string(link.target));
    }
    if (link.learnable()) {
      if (link.weight >= weight_count_) throw SpecError(where + " weight index out of range");
      referenced[link.weight] = true;
    } else if (!std::isfinite(link.fixed_value)) {
      throw SpecError(where + " has a non-finite fixed weight");
    }
    ++in_count[link.target];
  }
  for (std::size_t w = 0; w < weight_count_; ++w) {
    if (!referenced[w]) throw SpecError("weight " + std::to_string(w) + " is referenced by no link");
  }

  incoming_offsets_.assign(n + 1, 0);
  for (std::size_t u = 0; u < n; ++u) incoming_offsets_[u + 1] = incoming_offsets_[u] + in_count[u];
  incoming_.resize(links_.size());
  std::vector<std::size_t> fill(incoming_offsets_.begin(), incoming_offsets_.end() - 1);
  for (std::size_t l = 0; l < links_.size(); ++l) incoming_[fill[links_[l].target]++] = l;
  // Canonical order makes summation independent of the order links were listed in.
  auto key = [this](std::size_t l) {
    const auto& k = links_[l];
    return std::make_tuple(k.source, k.delay, k.combine, k.weight, k.fixed_value);
  };
  for (std::size_t u = 0; u < n; ++u) {
    std::stable_sort(incoming_.begin() + incoming_offsets_[u], incoming_.begin() + incoming_offsets_[u + 1],
                     [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  }

  // Kahn's algorithm over delay-0 links between computed units, smallest id first.
  auto computed = [this](std::size_t u) {
    return units_[u].kind == UnitKind::hidden || units_[u].kind == UnitKind::output;
  };
  std::vector<std::size_t> pending(n, 0);
  std::vector<std::vector<std::size_t>> successors(n);
  for (const auto& link : links_) {
    if (link.delay == 0 && computed(link.source)) {
      ++pending[link.target];
      successors[link.source].push_back(link.target);
    }
  }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  std::size_t computed_count = 0;
  for (std::size_t u = 0; u < n; ++u) {
    if (!computed(u)) continue;
    ++computed_count;
    if (pending[u] == 0) ready.push(u);
  }
  while (!ready.empty()) {
    auto u = ready.top();
    ready.pop();
    order_.push_back(u);
    for (auto s : successors[u]) {
      if (--pending[s] == 0) ready.push(s);
    }
  }
  if (order_.size() != computed_count) throw SpecError("zero-delay links contain a cycle");
}

std::span<const std::size_t> NetSpec::incoming(std::size_t unit) const {
  return std::span<const std::size_t>(incoming_).subspan(incoming_offsets_.at(unit),
                                                          incoming_offsets_[unit + 1] - incoming_offsets_[unit]);
}

std::optional<std::size_t> NetSpec::find(const std::string& label) const {
  for (std::size_t u = 0; u < units_.size(); ++u) {
    if (units_[u].label == label) return u;
  }
  return std::nullopt;
}

namespace {

void check_dims(const NetSpec& spec, const NetParams& params, std::span<const double> prev,
                std::span<const double> input) {
  if (params.weights.size() != spec.weight_count()) {
    throw DimensionError("expected " + std::to_string(spec.weight_count()) + " weights, got " +
                         std::to_string(params.weights.size()));
  }
  if (prev.size() != spec.unit_count()) {
    throw DimensionError("expected " + std::to_string(spec.unit_count()) + " previous activations, got " +
                         std::to_string(prev.size()));
  }
  if (input.size() != spec.inputs().size()) {
    throw DimensionError("expected " + std::to_string(spec.inputs().size()) + " inputs, got " +
                         std::to_string(input.size()));
  }
}

// Fills `current` in place; `current` must hold the inputs and biases already.
void spread(const NetSpec& spec, const NetParams& params, std::span<const double> prev, std::span<double> current,
            const NetInjection* injection) {
  const auto& links = spec.links();
  for (auto u : spec.order()) {
    const auto& unit = spec.unit(u);
    double sum = 0.0;
    double product = 1.0;
    for (auto l : spec.incoming(u)) {
      const auto& link = links[l];
      const double term = source_value(link, current, prev) * link_weight(link, params);
      if (link.combine == Combine::additive) {
        sum += term;
      } else {
        product *= term;
      }
    }
    double net;
    if (unit.net == Combine::additive) {
      if (injection != nullptr) {
        net = (sum + injection->add[u]) * product * injection->gain[u];
      } else {
        net = sum * product;
      }
    } else {
      net = injection != nullptr ? product * injection->gain[u] + injection->add[u] : product;
    }
    const double value = activate(unit.activation, net);
    if (!std::isfinite(value)) {
      throw NumericError("non-finite activation at unit " + std::to_string(u) +
                         (unit.label.empty() ? std::string() : " (" + unit.label + ")"));
    }
    current[u] = value;
  }
}

void load_inputs(const NetSpec& spec, std::span<const double> input, std::span<double> current) {
  for (std::size_t i = 0; i < spec.inputs().size(); ++i) current[spec.inputs()[i]] = input[i];
  for (auto b : spec.biases()) current[b] = 1.0;
}

}  // namespace

std::vector<double> forward_step(const NetSpec& spec, const NetParams& params,
                                 std::span<const double> prev_activations, std::span<const double> input,
                                 const NetInjection* injection) {
  check_dims(spec, params, prev_activations, input);
  if (injection != nullptr &&
      (injection->add.size() != spec.unit_count() || injection->gain.size() != spec.unit_count())) {
    throw DimensionError("injection size does not match unit count");
  }
  std::vector<double> current(spec.unit_count(), 0.0);
  load_inputs(spec, input, current);
  spread(spec, params, prev_activations, current, injection);
  return current;
}

ActivationTrace run_episode(const NetSpec& spec, const NetParams& params,
                            std::span<const std::vector<double>> inputs) {
  ActivationTrace trace;
  std::vector<double> prev(spec.unit_count(), 0.0);
  for (const auto& x : inputs) {
    auto next = forward_step(spec, params, prev, x);
    trace.steps.push_back(next);
    prev = std::move(next);
  }
  return trace;
}

std::vector<double> read_outputs(const NetSpec& spec, std::span<const double> activations) {
  std::vector<double> out;
  out.reserve(spec.outputs().size());
  for (auto u : spec.outputs()) out.push_back(activations[u]);
  return out;
}

GradientResult bptt_gradient(const NetSpec& spec, const NetParams& params,
                             std::span<const std::vector<double>> inputs, const StepLoss& loss) {
  const std::size_t n = spec.unit_count();
  const std::size_t steps = inputs.size();
  const auto& links = spec.links();
  GradientResult result;
  result.gradient.assign(spec.weight_count(), 0.0);
  if (steps == 0) return result;

  ActivationTrace trace = run_episode(spec, params, inputs);
  const std::vector<double> zeros(n, 0.0);
  auto activations_at = [&](std::size_t t) -> std::span<const double> {
    return t == 0 ? std::span<const double>(zeros) : std::span<const double>(trace.steps[t - 1]);
  };

  // d_act[u]: dLoss/dActivation of unit u at the step being processed.
  // d_carry[u]: contribution flowing into step t-1 through delay-1 links.
  std::vector<double> d_act(n, 0.0), d_carry(n, 0.0);
  std::vector<double> outputs(spec.outputs().size()), d_outputs(spec.outputs().size());
  std::vector<double> mult_terms, prefix, suffix;

  for (std::size_t t = steps; t-- > 0;) {
    std::span<const double> current = trace.steps[t];
    std::span<const double> prev = activations_at(t);
    std::swap(d_act, d_carry);
    std::fill(d_carry.begin(), d_carry.end(), 0.0);

    for (std::size_t k = 0; k < outputs.size(); ++k) outputs[k] = current[spec.outputs()[k]];
    std::fill(d_outputs.begin(), d_outputs.end(), 0.0);
    result.loss += loss(t, outputs, d_outputs);
    for (std::size_t k = 0; k < outputs.size(); ++k) d_act[spec.outputs()[k]] += d_outputs[k];

    const auto& order = spec.order();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const auto u = *it;
      const auto& unit = spec.unit(u);
      const double d_net = d_act[u] * activation_slope(unit.activation, current[u]);
      if (d_net == 0.0) continue;

      auto incoming = spec.incoming(u);
      double sum = 0.0;
      mult_terms.clear();
      for (auto l : incoming) {
        const auto& link = links[l];
        const double term = source_value(link, current, prev) * link_weight(link, params);
        if (link.combine == Combine::additive) {
          sum += term;
        } else {
          mult_terms.push_back(term);
        }
      }
      const std::size_t m = mult_terms.size();
      prefix.assign(m + 1, 1.0);
      suffix.assign(m + 1, 1.0);
      for (std::size_t i = 0; i < m; ++i) prefix[i + 1] = prefix[i] * mult_terms[i];
      for (std::size_t i = m; i-- > 0;) suffix[i] = suffix[i + 1] * mult_terms[i];
      const double sum_factor = unit.net == Combine::additive ? sum : 1.0;

      std::size_t mi = 0;
      for (auto l : incoming) {
        const auto& link = links[l];
        double d_term;
        if (link.combine == Combine::additive) {
          d_term = d_net * prefix[m];
        } else {
          d_term = d_net * sum_factor * prefix[mi] * suffix[mi + 1];
          ++mi;
        }
        const double x = source_value(link, current, prev);
        if (link.learnable()) result.gradient[link.weight] += d_term * x;
        const double dx = d_term * link_weight(link, params);
        if (link.delay == 0) {
          d_act[link.source] += dx;
        } else {
          d_carry[link.source] += dx;
        }
      }
    }
  }
  return result;
}

NetParams sgd_step(const NetParams& params, std::span<const double> gradient, double learning_rate) {
  if (gradient.size() != params.weights.size()) {
    throw DimensionError("gradient length " + std::to_string(gradient.size()) + " does not match " +
                         std::to_string(params.weights.size()) + " weights");
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  NetParams next = params;
  for (std::size_t i = 0; i < gradient.size(); ++i) {
    if (!std::isfinite(gradient[i])) throw NumericError("non-finite gradient at weight " + std::to_string(i));
    next.weights[i] -= learning_rate * gradient[i];
  }
  return next;
}

NetParams initial_params(const NetSpec& spec, Rng& rng, double scale) {
  NetParams params;
  params.weights.resize(spec.weight_count());
  for (auto& w : params.weights) w = uniform(rng, -scale, scale);
  auto ends_with = [](const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  for (const auto& link : spec.links()) {
    if (!link.learnable() || spec.unit(link.source).kind != UnitKind::bias) continue;
    const auto& label = spec.unit(link.target).label;
    if (ends_with(label, ".forget_gate")) {
      params.weights[link.weight] = 1.0;
    } else if (ends_with(label, "_gate")) {
      params.weights[link.weight] = 0.0;
    }
  }
  return params;
}

NetSpec make_lstm_spec(std::size_t n_in, std::size_t n_cells, std::size_t n_out) {
  if (n_in == 0 || n_cells == 0 || n_out == 0) throw std::invalid_argument("LSTM sizes must be positive");
  std::vector<UnitSpec> units;
  std::vector<LinkSpec> links;
  std::size_t weights = 0;
  auto add_unit = [&](UnitKind kind, Activation act, Combine net, std::string label) {
    units.push_back({kind, act, net, std::move(label)});
    return units.size() - 1;
  };
  auto learnable = [&](std::size_t src, std::size_t dst, int delay) {
    links.push_back({src, dst, weights++, 1.0, delay, Combine::additive});
  };
  auto fixed = [&](std::size_t src, std::size_t dst, int delay, Combine combine) {
    links.push_back({src, dst, kFixedWeight, 1.0, delay, combine});
  };

  std::vector<std::size_t> in(n_in);
  for (std::size_t i = 0; i < n_in; ++i) {
    in[i] = add_unit(UnitKind::input, Activation::identity, Combine::additive, "in" + std::to_string(i));
  }
  const auto bias = add_unit(UnitKind::bias, Activation::identity, Combine::additive, "bias");

  struct Cell {
    std::size_t input_gate, forget_gate, output_gate, candidate, write, retain, state, squash, out;
  };
  std::vector<Cell> cells(n_cells);
  for (std::size_t k = 0; k < n_cells; ++k) {
    const std::string p = "c" + std::to_string(k) + ".";
    auto& c = cells[k];
    c.input_gate = add_unit(UnitKind::hidden, Activation::sigmoid, Combine::additive, p + "input_gate");
    c.forget_gate = add_unit(UnitKind::hidden, Activation::sigmoid, Combine::additive, p + "forget_gate");
    c.output_gate = add_unit(UnitKind::hidden, Activation::sigmoid, Combine::additive, p + "output_gate");
    c.candidate = add_unit(UnitKind::hidden, Activation::tanh, Combine::additive, p + "candidate");
    c.write = add_unit(UnitKind::hidden, Activation::identity, Combine::multiplicative, p + "write");
    c.retain = add_unit(UnitKind::hidden, Activation::identity, Combine::multiplicative, p + "retain");
    c.state = add_unit(UnitKind::hidden, Activation::identity, Combine::additive, p + "state");
    c.squash = add_unit(UnitKind::hidden, Activation::tanh, Combine::additive, p + "squash");
    c.out = add_unit(UnitKind::hidden, Activation::identity, Combine::multiplicative, p + "h");
  }
  std::vector<std::size_t> outs(n_out);
  for (std::size_t j = 0; j < n_out; ++j) {
    outs[j] = add_unit(UnitKind::output, Activation::identity, Combine::additive, "out" + std::to_string(j));
  }

  for (const auto& c : cells) {
    for (auto dst : {c.input_gate, c.forget_gate, c.output_gate, c.candidate}) {
      for (auto src : in) learnable(src, dst, 0);
      learnable(bias, dst, 0);
      for (const auto& other : cells) learnable(other.out, dst, 1);
    }
    fixed(c.input_gate, c.write, 0, Combine::multiplicative);
    fixed(c.candidate, c.write, 0, Combine::multiplicative);
    fixed(c.forget_gate, c.retain, 0, Combine::multiplicative);
    fixed(c.state, c.retain, 1, Combine::multiplicative);  // constant error carousel
    fixed(c.write, c.state, 0, Combine::additive);
    fixed(c.retain, c.state, 0, Combine::additive);
    fixed(c.state, c.squash, 0, Combine::additive);
    fixed(c.output_gate, c.out, 0, Combine::multiplicative);
    fixed(c.squash, c.out, 0, Combine::multiplicative);
  }
  for (auto dst : outs) {
    for (const auto& c : cells) learnable(c.out, dst, 0);
    learnable(bias, dst, 0);
  }
  return NetSpec(std::move(units), std::move(links), weights);
}

NetSpec make_rnn_spec(std::size_t n_in, std::size_t n_hidden, std::size_t n_out, Activation output_activation) {
  std::vector<UnitSpec> units;
  std::vector<LinkSpec> links;
  std::size_t weights = 0;
  for (std::size_t i = 0; i < n_in; ++i) {
    units.push_back({UnitKind::input, Activation::identity, Combine::additive, "in" + std::to_string(i)});
  }
  units.push_back({UnitKind::bias, Activation::identity, Combine::additive, "bias"});
  const std::size_t bias = n_in;
  const std::size_t first_hidden = units.size();
  for (std::size_t k = 0; k < n_hidden; ++k) {
    units.push_back({UnitKind::hidden, Activation::tanh, Combine::additive, "h" + std::to_string(k)});
  }
  const std::size_t first_out = units.size();
  for (std::size_t j = 0; j < n_out; ++j) {
    units.push_back({UnitKind::output, output_activation, Combine::additive, "out" + std::to_string(j)});
  }
  auto link = [&](std::size_t src, std::size_t dst, int delay) {
    links.push_back({src, dst, weights++, 1.0, delay, Combine::additive});
  };
  for (std::size_t k = 0; k < n_hidden; ++k) {
    const std::size_t dst = first_hidden + k;
    for (std::size_t i = 0; i < n_in; ++i) link(i, dst, 0);
    link(bias, dst, 0);
    for (std::size_t r = 0; r < n_hidden; ++r) link(first_hidden + r, dst, 1);
  }
  for (std::size_t j = 0; j < n_out; ++j) {
    const std::size_t dst = first_out + j;
    for (std::size_t k = 0; k < n_hidden; ++k) link(first_hidden + k, dst, 0);
    for (std::size_t i = 0; i < n_in; ++i) link(i, dst, 0);
    link(bias, dst, 0);
  }
  return NetSpec(std::move(units), std::move(links), weights);
}

void write_net(std::ostream& out, const NetSpec& spec, const NetParams& params) {
  if (params.weights.size() != spec.weight_count()) throw DimensionError("params do not match spec");
  out << "net," << spec.unit_count() << ',' << spec.links().size() << ',' << spec.weight_count() << '\n';
  for (std::size_t u = 0; u < spec.unit_count(); ++u) {
    const auto& unit = spec.unit(u);
    out << "unit," << u << ',' << to_string(unit.kind) << ',' << to_string(unit.activation) << ','
        << to_string(unit.net) << ',' << unit.label << '\n';
  }
  for (const auto& link : spec.links()) {
    out << "link," << link.source << ',' << link.target << ',';
    if (link.learnable()) {
      out << link.weight;
    } else {
      out << '-';
    }
    out << ',' << text::format_real(link.fixed_value) << ',' << link.delay << ',' << to_string(link.combine) << '\n';
  }
  for (std::size_t w = 0; w < params.weights.size(); ++w) {
    out << "weight," << w << ',' << text::format_real(params.weights[w]) << '\n';
  }
}

std::pair<NetSpec, NetParams> read_net(std::istream& in) {
  auto header_line = text::expect_line(in, "net header");
  auto header = text::split(header_line);
  if (header.size() != 4 || header[0] != "net") throw FormatError("expected net header, got '" + header_line + "'");
  const auto n_units = text::parse_uint(header[1]);
  const auto n_links = text::parse_uint(header[2]);
  const auto n_weights = text::parse_uint(header[3]);

  std::vector<UnitSpec> units;
  for (std::uint64_t u = 0; u < n_units; ++u) {
    auto line = text::expect_line(in, "unit");
    auto f = text::split(line);
    if (f.size() != 6 || f[0] != "unit" || text::parse_uint(f[1]) != u) {
      throw FormatError("bad unit line '" + line + "'");
    }
    units.push_back({parse_kind(f[2]), parse_activation(f[3]), parse_combine(f[4]), std::string(f[5])});
  }
  std::vector<LinkSpec> links;
  for (std::uint64_t l = 0; l < n_links; ++l) {
    auto line = text::expect_line(in, "link");
    auto f = text::split(line);
    if (f.size() != 7 || f[0] != "link") throw FormatError("bad link line '" + line + "'");
    LinkSpec link;
    link.source = text::parse_uint(f[1]);
    link.target = text::parse_uint(f[2]);
    link.weight = f[3] == "-" ? kFixedWeight : text::parse_uint(f[3]);
    link.fixed_value = text::parse_real(f[4]);
    link.delay = static_cast<int>(text::parse_int(f[5]));
    link.combine = parse_combine(f[6]);
    links.push_back(link);
  }
  NetParams params;
  params.weights.resize(n_weights);
  for (std::uint64_t w = 0; w < n_weights; ++w) {
    auto line = text::expect_line(in, "weight");
    auto f = text::split(line);
    if (f.size() != 3 || f[0] != "weight" || text::parse_uint(f[1]) != w) {
      throw FormatError("bad weight line '" + line + "'");
    }
    params.weights[w] = text::parse_real(f[2]);
    if (!std::isfinite(params.weights[w])) throw FormatError("non-finite weight " + std::to_string(w));
  }
  try {
    return {NetSpec(std::move(units), std::move(links), n_weights), std::move(params)};
  } catch (const SpecError& e) {
    throw FormatError(std::string("invalid network: ") + e.what());
  }
}

std::uint64_t net_hash(const NetSpec& spec, const NetParams& params) {
  std::ostringstream text_form;
  write_net(text_form, spec, params);
  return fnv1a64(text_form.str());
}

}  // namespace cmrl::nn

// Structural search over the world model: grow or prune one unit or link at
// a time and keep the change only if it shortens the total code length.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <tuple>

#include "cmrl/errors.hpp"
#include "cmrl/world_model.hpp"

namespace cmrl {

const char* to_string(Mutation mutation) {
  switch (mutation) {
    case Mutation::add_unit: return "add_unit";
    case Mutation::add_link: return "add_link";
    case Mutation::prune_link: return "prune_link";
    case Mutation::prune_unit: return "prune_unit";
  }
  return "?";
}

namespace {

using nn::Combine;
using nn::LinkSpec;
using nn::UnitKind;
using nn::UnitSpec;

// Every output must stay reachable from some input through links of any delay.
bool outputs_reachable(const std::vector<UnitSpec>& units, const std::vector<LinkSpec>& links) {
  std::vector<char> seen(units.size(), 0);
  std::vector<std::size_t> frontier;
  for (std::size_t u = 0; u < units.size(); ++u) {
    if (units[u].kind == UnitKind::input) {
      seen[u] = 1;
      frontier.push_back(u);
    }
  }
  while (!frontier.empty()) {
    const auto u = frontier.back();
    frontier.pop_back();
    for (const auto& l : links) {
      if (l.source == u && !seen[l.target]) {
        seen[l.target] = 1;
        frontier.push_back(l.target);
      }
    }
  }
  for (std::size_t u = 0; u < units.size(); ++u) {
    if (units[u].kind == UnitKind::output && !seen[u]) return false;
  }
  return true;
}

// Drops `removed_links` and `removed_unit`, renumbers units and weights and
// keeps the relative order of everything that survives.
WorldModel rebuild(const WorldModel& model, const std::set<std::size_t>& removed_links,
                   std::optional<std::size_t> removed_unit) {
  const auto& spec = model.spec();
  const auto& w = model.params().weights;
  std::vector<UnitSpec> units;
  std::vector<std::size_t> unit_map(spec.unit_count(), nn::kFixedWeight);
  for (std::size_t u = 0; u < spec.unit_count(); ++u) {
    if (removed_unit && *removed_unit == u) continue;
    unit_map[u] = units.size();
    units.push_back(spec.unit(u));
  }
  std::vector<LinkSpec> links;
  std::vector<char> used(spec.weight_count(), 0);
  for (std::size_t i = 0; i < spec.links().size(); ++i) {
    const auto& l = spec.links()[i];
    if (removed_links.count(i) || unit_map[l.source] == nn::kFixedWeight || unit_map[l.target] == nn::kFixedWeight) {
      continue;
    }
    if (l.learnable()) used[l.weight] = 1;
    links.push_back(l);
  }
  std::vector<std::size_t> weight_map(spec.weight_count(), nn::kFixedWeight);
  nn::NetParams params;
  for (std::size_t k = 0; k < spec.weight_count(); ++k) {
    if (!used[k]) continue;
    weight_map[k] = params.weights.size();
    params.weights.push_back(w[k]);
  }
  for (auto& l : links) {
    l.source = unit_map[l.source];
    l.target = unit_map[l.target];
    if (l.learnable()) l.weight = weight_map[l.weight];
  }
  const auto count = params.weights.size();
  return WorldModel(model.dims(), nn::NetSpec(std::move(units), std::move(links), count), std::move(params),
                    model.coding());
}

std::string next_hidden_label(const nn::NetSpec& spec) {
  std::size_t next = 0;
  for (const auto u : spec.hidden()) {
    const auto& label = spec.unit(u).label;
    if (label.size() < 2 || label[0] != 'h') continue;
    std::size_t k = 0;
    auto [p, ec] = std::from_chars(label.data() + 1, label.data() + label.size(), k);
    if (ec == std::errc() && p == label.data() + label.size()) next = std::max(next, k + 1);
  }
  return "h" + std::to_string(next);
}

bool is_plain_hidden(const nn::NetSpec& spec, std::size_t u) {
  const auto& unit = spec.unit(u);
  if (unit.kind != UnitKind::hidden || unit.net != Combine::additive) return false;
  for (const auto& l : spec.links()) {
    if ((l.source == u || l.target == u) && (!l.learnable() || l.combine != Combine::additive)) return false;
  }
  return true;
}

struct LinkCandidate {
  std::size_t source;
  std::size_t target;
  int delay;
};

std::vector<LinkCandidate> link_candidates(const nn::NetSpec& spec) {
  std::set<std::tuple<std::size_t, std::size_t, int>> existing;
  for (const auto& l : spec.links()) existing.insert({l.source, l.target, l.delay});
  std::vector<LinkCandidate> out;
  for (std::size_t dst = 0; dst < spec.unit_count(); ++dst) {
    const auto& t = spec.unit(dst);
    if ((t.kind != UnitKind::hidden && t.kind != UnitKind::output) || t.net != Combine::additive) continue;
    for (std::size_t src = 0; src < spec.unit_count(); ++src) {
      const auto kind = spec.unit(src).kind;
      // Delay-0 links only from inputs and bias, which cannot close a cycle.
      const int delay = (kind == UnitKind::input || kind == UnitKind::bias) ? 0 : 1;
      if (!existing.count({src, dst, delay})) out.push_back({src, dst, delay});
    }
  }
  return out;
}

std::optional<std::size_t> smallest_prunable_link(const nn::NetSpec& spec, const std::vector<double>& w) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < spec.links().size(); ++i) {
    const auto& l = spec.links()[i];
    if (!l.learnable() || l.combine != Combine::additive) continue;
    if (best && std::abs(w[l.weight]) >= std::abs(w[spec.links()[*best].weight])) continue;
    auto links = spec.links();
    links.erase(links.begin() + static_cast<std::ptrdiff_t>(i));
    if (outputs_reachable(spec.units(), links)) best = i;
  }
  return best;
}

std::optional<std::size_t> smallest_prunable_unit(const WorldModel& model, const StructureConfig& cfg) {
  const auto& spec = model.spec();
  const auto& w = model.params().weights;
  if (spec.hidden().size() < 2) return std::nullopt;
  std::optional<std::size_t> best;
  double best_max = 0.0;
  for (const auto u : spec.hidden()) {
    if (!is_plain_hidden(spec, u)) continue;
    double max_w = 0.0;
    for (const auto& l : spec.links()) {
      if (l.source == u || l.target == u) max_w = std::max(max_w, std::abs(l.learnable() ? w[l.weight] : l.fixed_value));
    }
    if (max_w >= cfg.small_unit_threshold) continue;
    if (best && max_w >= best_max) continue;
    std::vector<LinkSpec> links;
    for (const auto& l : spec.links()) {
      if (l.source != u && l.target != u) links.push_back(l);
    }
    auto units = spec.units();
    units[u].kind = UnitKind::bias;  // detached stand-in, keeps indices valid
    if (!outputs_reachable(units, links)) continue;
    best = u;
    best_max = max_w;
  }
  return best;
}

}  // namespace

WorldModel add_hidden_unit(const WorldModel& model, Rng& rng, const StructureConfig& cfg) {
  const auto& spec = model.spec();
  auto units = spec.units();
  auto links = spec.links();
  auto params = model.params();
  const std::size_t fresh = units.size();
  units.push_back({UnitKind::hidden, nn::Activation::tanh, Combine::additive, next_hidden_label(spec)});

  auto connect = [&](std::size_t src, std::size_t dst, int delay) {
    links.push_back({src, dst, params.weights.size(), 1.0, delay, Combine::additive});
    params.weights.push_back(uniform(rng, -cfg.init_scale, cfg.init_scale));
  };
  auto coin = [&] { return uniform01(rng) < cfg.fanin_probability; };

  std::vector<std::size_t> from_inputs;
  for (const auto i : spec.inputs()) {
    if (coin()) from_inputs.push_back(i);
  }
  if (from_inputs.empty()) from_inputs.push_back(spec.inputs()[uniform_index(rng, spec.inputs().size())]);
  for (const auto i : from_inputs) connect(i, fresh, 0);
  for (const auto b : spec.biases()) connect(b, fresh, 0);
  for (const auto h : spec.hidden()) {
    if (coin()) connect(h, fresh, 1);
  }
  if (coin()) connect(fresh, fresh, 1);

  std::vector<std::size_t> to_outputs;
  for (const auto j : spec.outputs()) {
    if (coin()) to_outputs.push_back(j);
  }
  if (to_outputs.empty()) to_outputs.push_back(spec.outputs()[uniform_index(rng, spec.outputs().size())]);
  for (const auto j : to_outputs) connect(fresh, j, 0);
  for (const auto h : spec.hidden()) {
    if (spec.unit(h).net == Combine::additive && coin()) connect(fresh, h, 1);
  }

  const auto count = params.weights.size();
  return WorldModel(model.dims(), nn::NetSpec(std::move(units), std::move(links), count), std::move(params),
                    model.coding());
}

std::optional<WorldModel> add_random_link(const WorldModel& model, Rng& rng, const StructureConfig& cfg) {
  const auto candidates = link_candidates(model.spec());
  if (candidates.empty()) return std::nullopt;
  const auto c = candidates[uniform_index(rng, candidates.size())];
  auto links = model.spec().links();
  auto params = model.params();
  links.push_back({c.source, c.target, params.weights.size(), 1.0, c.delay, Combine::additive});
  params.weights.push_back(uniform(rng, -cfg.init_scale, cfg.init_scale));
  const auto count = params.weights.size();
  return WorldModel(model.dims(), nn::NetSpec(model.spec().units(), std::move(links), count), std::move(params),
                    model.coding());
}

std::optional<WorldModel> prune_smallest_link(const WorldModel& model) {
  const auto link = smallest_prunable_link(model.spec(), model.params().weights);
  if (!link) return std::nullopt;
  return rebuild(model, {*link}, std::nullopt);
}

std::optional<WorldModel> prune_small_unit(const WorldModel& model, const StructureConfig& cfg) {
  const auto unit = smallest_prunable_unit(model, cfg);
  if (!unit) return std::nullopt;
  return rebuild(model, {}, *unit);
}

std::vector<Mutation> applicable_mutations(const WorldModel& model, const StructureConfig& cfg) {
  std::vector<Mutation> out{Mutation::add_unit};
  if (!link_candidates(model.spec()).empty()) out.push_back(Mutation::add_link);
  if (smallest_prunable_link(model.spec(), model.params().weights)) out.push_back(Mutation::prune_link);
  if (smallest_prunable_unit(model, cfg)) out.push_back(Mutation::prune_unit);
  return out;
}

StructuralProposal propose_structural_change(const WorldModel& model, Rng& rng, const StructureConfig& cfg) {
  const auto options = applicable_mutations(model, cfg);
  const auto pick = options[uniform_index(rng, options.size())];
  switch (pick) {
    case Mutation::add_unit: return {add_hidden_unit(model, rng, cfg), pick};
    case Mutation::add_link: return {*add_random_link(model, rng, cfg), pick};
    case Mutation::prune_link: return {*prune_smallest_link(model), pick};
    case Mutation::prune_unit: return {*prune_small_unit(model, cfg), pick};
  }
  throw ContractError("unknown mutation");
}

}  // namespace cmrl

#include "cmrl/policy_net.hpp"

#include <istream>
#include <map>
#include <ostream>
#include <tuple>

#include "cmrl/errors.hpp"
#include "cmrl/text_io.hpp"

namespace cmrl {

using nn::Activation;
using nn::Combine;
using nn::UnitKind;

PolicyNet make_policy_net(const std::vector<std::string>& keys, std::size_t hidden, std::size_t actions) {
  if (actions == 0) throw std::invalid_argument("policy needs at least one action");
  std::vector<nn::UnitSpec> units;
  std::vector<nn::LinkSpec> links;
  std::size_t w = 0;
  for (const auto& k : keys) units.push_back({UnitKind::input, Activation::identity, Combine::additive, k});
  const std::size_t bias = units.size();
  units.push_back({UnitKind::bias, Activation::identity, Combine::additive, "bias"});
  const std::size_t first_hidden = units.size();
  for (std::size_t j = 0; j < hidden; ++j) {
    units.push_back({UnitKind::hidden, Activation::tanh, Combine::additive, "ph" + std::to_string(j)});
  }
  const std::size_t first_out = units.size();
  for (std::size_t a = 0; a < actions; ++a) {
    units.push_back({UnitKind::output, Activation::identity, Combine::additive, "act" + std::to_string(a)});
  }
  for (std::size_t j = 0; j < hidden; ++j) {
    for (std::size_t i = 0; i <= bias; ++i) links.push_back({i, first_hidden + j, w++, 1.0, 0, Combine::additive});
  }
  for (std::size_t a = 0; a < actions; ++a) {
    for (std::size_t i = 0; i <= bias; ++i) links.push_back({i, first_out + a, w++, 1.0, 0, Combine::additive});
    for (std::size_t j = 0; j < hidden; ++j) {
      links.push_back({first_hidden + j, first_out + a, w++, 1.0, 0, Combine::additive});
    }
  }
  return {nn::NetSpec(std::move(units), std::move(links), w), keys};
}

PolicyNet rekey_policy(const PolicyNet& net, const std::vector<std::string>& keys) {
  return make_policy_net(keys, net.spec.hidden().size(), net.spec.outputs().size());
}

std::vector<double> remap_policy_genome(const PolicyNet& from, const std::vector<double>& genome,
                                        const PolicyNet& to) {
  if (genome.size() != from.genome_length()) throw DimensionError("genome does not match the policy");
  // A link is identified by (source label, target label).
  std::map<std::pair<std::string, std::string>, double> by_label;
  for (const auto& l : from.spec.links()) {
    by_label[{from.spec.unit(l.source).label, from.spec.unit(l.target).label}] = genome[l.weight];
  }
  std::vector<double> out(to.genome_length(), 0.0);
  for (const auto& l : to.spec.links()) {
    auto it = by_label.find({to.spec.unit(l.source).label, to.spec.unit(l.target).label});
    if (it != by_label.end()) out[l.weight] = it->second;
  }
  return out;
}

std::size_t policy_action(const PolicyNet& net, const std::vector<double>& genome, std::span<const double> state) {
  if (genome.size() != net.genome_length()) throw DimensionError("genome does not match the policy");
  if (state.size() != net.keys.size()) throw DimensionError("state does not match the policy's inputs");
  const std::vector<double> zeros(net.spec.unit_count(), 0.0);
  const nn::NetParams params{genome};
  const auto act = nn::forward_step(net.spec, params, zeros, state);
  return decode_action(nn::read_outputs(net.spec, act));
}

PolicyAgent::PolicyAgent(const PolicyNet& net, const std::vector<double>& genome, const WorldModel& model)
    : net_(&net), genome_(&genome), tracker_(model) {}

std::size_t PolicyAgent::act(std::span<const double> sense) {
  const auto s = tracker_.features(sense);
  const auto a = policy_action(*net_, *genome_, s);
  tracker_.advance(sense, a);
  return a;
}

void write_policy(std::ostream& out, const PolicyNet& net) {
  out << "policy," << net.spec.hidden().size() << ',' << net.spec.outputs().size() << ',' << net.keys.size() << '\n';
  out << "keys";
  for (const auto& k : net.keys) out << ',' << k;
  out << '\n';
}

PolicyNet read_policy(std::istream& in) {
  auto h = text::split_owned(text::expect_line(in, "policy header"));
  if (h.size() != 4 || h[0] != "policy") throw FormatError("bad policy header");
  auto k = text::split_owned(text::expect_line(in, "policy keys"));
  if (k.size() != text::parse_uint(h[3]) + 1 || k[0] != "keys") throw FormatError("bad policy key line");
  std::vector<std::string> keys(k.begin() + 1, k.end());
  return make_policy_net(keys, text::parse_uint(h[1]), text::parse_uint(h[2]));
}

}  // namespace cmrl

#pragma once

// C2: a feedforward policy over M's Markovized state, trained by evolution.

#include <iosfwd>
#include <string>
#include <vector>

#include "cmrl/agent.hpp"
#include "cmrl/nn.hpp"

namespace cmrl {

struct PolicyNet {
  nn::NetSpec spec;
  std::vector<std::string> keys;  // one per input unit

  std::size_t genome_length() const { return spec.weight_count(); }
  bool operator==(const PolicyNet&) const = default;
};

/// inputs (one per key) and bias -> `hidden` tanh units -> linear action
/// outputs, plus direct input-to-output links.
PolicyNet make_policy_net(const std::vector<std::string>& keys, std::size_t hidden, std::size_t actions);

/// Same architecture over new feature keys. Weights of surviving keys carry
/// over; links from new keys start at 0.
PolicyNet rekey_policy(const PolicyNet& net, const std::vector<std::string>& keys);
std::vector<double> remap_policy_genome(const PolicyNet& from, const std::vector<double>& genome,
                                        const PolicyNet& to);

std::size_t policy_action(const PolicyNet& net, const std::vector<double>& genome, std::span<const double> state);

class PolicyAgent : public Agent {
 public:
  PolicyAgent(const PolicyNet& net, const std::vector<double>& genome, const WorldModel& model);
  void begin() override { tracker_.reset(); }
  std::size_t act(std::span<const double> sense) override;

 private:
  const PolicyNet* net_;
  const std::vector<double>* genome_;
  MarkovTracker tracker_;
};

void write_policy(std::ostream& out, const PolicyNet& net);
PolicyNet read_policy(std::istream& in);

}  // namespace cmrl

#pragma once

// C3: a small recurrent controller C coupled to a frozen world model M.
//
// C reads sense(t) plus, through interface_in links, M's hidden activations
// from the previous step. It emits o action activations and a sigmoid gate
// u. M then receives u * all(t) as input, and C's units reach into M's hidden
// units through interface_out links. M's own weights never change here; the
// genome holds C's weights and both interface weight sets.
//
// Genome slots are laid out as [C weights | interface_out | interface_in].
// Frozen slots keep a fixed value and are not part of the genome.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "cmrl/agent.hpp"
#include "cmrl/nn.hpp"
#include "cmrl/world_model.hpp"

namespace cmrl {

struct CMConfig {
  std::size_t c_hidden = 4;
  bool c_recurrent = true;
  std::size_t interface_width = 4;
  bool multiplicative_out = false;
  bool gate_enabled = true;
  bool freeze_interface_in = false;  // pins M -> C weights at 0
};

/// m_ordinal indexes M's hidden units in activation order, modulo h, so the
/// interface survives M growing or shrinking.
struct InterfaceLink {
  std::size_t c_unit = 0;
  std::size_t m_ordinal = 0;
  bool operator==(const InterfaceLink&) const = default;
};

struct CMSpec {
  nn::NetSpec c_spec;
  std::vector<std::size_t> action_units;
  std::size_t gate_unit = 0;
  bool gate_enabled = true;
  bool multiplicative_out = false;
  std::vector<InterfaceLink> interface_out;  // C unit -> M hidden unit
  std::vector<InterfaceLink> interface_in;   // M hidden unit -> C unit
  std::vector<char> frozen;                  // one flag per slot
  std::vector<double> frozen_values;         // one value per slot

  std::size_t slot_count() const { return c_spec.weight_count() + interface_out.size() + interface_in.size(); }
  std::size_t genome_length() const;
  bool operator==(const CMSpec&) const = default;
};

CMSpec make_cm_spec(const Dims& dims, std::size_t m_hidden, const CMConfig& cfg);

/// Genome expanded to every slot, frozen values filled in.
struct CMWeights {
  nn::NetParams c;
  std::vector<double> out;
  std::vector<double> in;
};
CMWeights expand_genome(const CMSpec& cm, std::span<const double> genome);

struct CMState {
  std::vector<double> c;
  ModelState m;
  bool operator==(const CMState&) const = default;
};

CMState cm_reset(const CMSpec& cm, const WorldModel& model);

struct CMStep {
  CMState state;
  std::vector<double> out;  // C's action activations
  std::size_t action = 0;
  double gate = 1.0;
};

/// One joint step of C and M on sense(t).
CMStep cm_forward(const CMSpec& cm, const CMWeights& w, const WorldModel& model, const CMState& state,
                  std::span<const double> sense_t);
CMStep cm_forward(const CMSpec& cm, std::span<const double> genome, const WorldModel& model, const CMState& state,
                  std::span<const double> sense_t);

/// k joint steps with the input held at `last_sense` and no action executed;
/// M sees an all-zero action part.
CMState think_steps(const CMSpec& cm, const CMWeights& w, const WorldModel& model, std::size_t k,
                    const CMState& state, std::span<const double> last_sense);
CMState think_steps(const CMSpec& cm, std::span<const double> genome, const WorldModel& model, std::size_t k,
                    const CMState& state, std::span<const double> last_sense);

/// Freezes every current slot at its genome value, then adds `extra_units`
/// hidden units (each fed by sense and bias, feeding every action unit, with
/// a self-loop) and `extra_links` further C links. Returns the grown spec and
/// a zero genome over the new weights, which leaves behaviour unchanged.
std::pair<CMSpec, std::vector<double>> freeze_and_grow(const CMSpec& cm, std::span<const double> genome,
                                                       std::size_t extra_units, std::size_t extra_links);

class CMAgent : public Agent {
 public:
  CMAgent(const CMSpec& cm, std::span<const double> genome, const WorldModel& model, std::size_t think_k);
  void begin() override;
  std::size_t act(std::span<const double> sense) override;

 private:
  const CMSpec* cm_;
  CMWeights weights_;
  const WorldModel* model_;
  std::size_t think_k_;
  CMState state_;
};

void write_cm(std::ostream& out, const CMSpec& cm);
CMSpec read_cm(std::istream& in);

}  // namespace cmrl

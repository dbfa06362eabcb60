#pragma once

// Explicit-graph recurrent networks.
//
// A network is a list of units and a list of directed links. Every non-input
// unit computes x = f(net); an additive unit's net is the sum of its weighted
// incoming activations, a multiplicative unit's net is their product. Links
// carry a delay of 0 (same time step) or 1 (previous time step). Zero-delay
// links must form a DAG, so each step is evaluated in one pass over a fixed
// topological order and all recurrence goes through delay-1 links.
//
// Additive units may additionally receive multiplicative links; those gate
// the sum: net = (sum of additive terms) * (product of multiplicative terms).
// Multiplicative units accept only multiplicative links. An empty sum is 0 and
// an empty product is 1.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cmrl/rng.hpp"

namespace cmrl::nn {

enum class UnitKind : std::uint8_t { input, hidden, output, bias };
enum class Activation : std::uint8_t { identity, tanh, sigmoid };
enum class Combine : std::uint8_t { additive, multiplicative };

const char* to_string(UnitKind kind);
const char* to_string(Activation act);
const char* to_string(Combine combine);

struct UnitSpec {
  UnitKind kind = UnitKind::hidden;
  Activation activation = Activation::tanh;
  Combine net = Combine::additive;
  std::string label;  // free-form tag, no commas

  bool operator==(const UnitSpec&) const = default;
};

inline constexpr std::size_t kFixedWeight = std::numeric_limits<std::size_t>::max();

struct LinkSpec {
  std::size_t source = 0;
  std::size_t target = 0;
  std::size_t weight = kFixedWeight;  // index into NetParams, or kFixedWeight
  double fixed_value = 1.0;           // used when the link is not learnable
  int delay = 0;
  Combine combine = Combine::additive;

  bool learnable() const { return weight != kFixedWeight; }
  bool operator==(const LinkSpec&) const = default;
};

/// Validated, immutable network topology. Construction checks every graph
/// invariant and caches the evaluation order and per-unit incoming links.
class NetSpec {
 public:
  NetSpec() = default;
  NetSpec(std::vector<UnitSpec> units, std::vector<LinkSpec> links, std::size_t weight_count);

  const std::vector<UnitSpec>& units() const { return units_; }
  const std::vector<LinkSpec>& links() const { return links_; }
  const UnitSpec& unit(std::size_t id) const { return units_.at(id); }
  std::size_t unit_count() const { return units_.size(); }
  std::size_t weight_count() const { return weight_count_; }

  const std::vector<std::size_t>& inputs() const { return inputs_; }
  const std::vector<std::size_t>& outputs() const { return outputs_; }
  const std::vector<std::size_t>& hidden() const { return hidden_; }
  const std::vector<std::size_t>& biases() const { return biases_; }

  /// Non-input, non-bias units in evaluation order.
  const std::vector<std::size_t>& order() const { return order_; }
  /// Indices into links() of the links ending at `unit`, in canonical order.
  std::span<const std::size_t> incoming(std::size_t unit) const;

  /// Index of the first unit carrying `label`, if any.
  std::optional<std::size_t> find(const std::string& label) const;

  bool operator==(const NetSpec& other) const {
    return units_ == other.units_ && links_ == other.links_ && weight_count_ == other.weight_count_;
  }

 private:
  std::vector<UnitSpec> units_;
  std::vector<LinkSpec> links_;
  std::size_t weight_count_ = 0;

  std::vector<std::size_t> inputs_, outputs_, hidden_, biases_, order_;
  std::vector<std::size_t> incoming_offsets_, incoming_;
};

struct NetParams {
  std::vector<double> weights;

  bool operator==(const NetParams&) const = default;
};

/// Activation vectors of one episode, one entry per forward step since reset.
struct ActivationTrace {
  std::vector<std::vector<double>> steps;
  std::size_t length() const { return steps.size(); }
};

/// Extra terms applied to unit nets during a forward step, used to splice
/// externally owned connections into a network without changing its spec.
/// For additive units net = (sum + add[u]) * product * gain[u]; for
/// multiplicative units net = product * gain[u] + add[u].
struct NetInjection {
  std::vector<double> add;
  std::vector<double> gain;

  explicit NetInjection(std::size_t unit_count) : add(unit_count, 0.0), gain(unit_count, 1.0) {}
};

/// One step of activation spreading. Returns the new activation vector.
std::vector<double> forward_step(const NetSpec& spec, const NetParams& params,
                                 std::span<const double> prev_activations, std::span<const double> input,
                                 const NetInjection* injection = nullptr);

/// Runs an episode from the all-zero state.
ActivationTrace run_episode(const NetSpec& spec, const NetParams& params,
                            std::span<const std::vector<double>> inputs);

/// Copies the output-unit activations out of a full activation vector.
std::vector<double> read_outputs(const NetSpec& spec, std::span<const double> activations);

/// Per-step loss on the output units. Receives the step index and the output
/// activations; writes dLoss/dOutput into `d_outputs` (zero-initialised) and
/// returns the loss value.
using StepLoss =
    std::function<double(std::size_t step, std::span<const double> outputs, std::span<double> d_outputs)>;

struct GradientResult {
  double loss = 0.0;
  std::vector<double> gradient;
};

/// Exact gradient of the summed per-step loss with respect to all learnable
/// weights, by backpropagation through time from the all-zero state.
GradientResult bptt_gradient(const NetSpec& spec, const NetParams& params,
                             std::span<const std::vector<double>> inputs, const StepLoss& loss);

/// w <- w - learning_rate * g.
NetParams sgd_step(const NetParams& params, std::span<const double> gradient, double learning_rate);

/// Uniform [-0.1, 0.1] weights. Gate biases of LSTM cells start at 0, forget
/// gate biases at +1.
NetParams initial_params(const NetSpec& spec, Rng& rng, double scale = 0.1);

/// LSTM with forget gates and no peepholes, built from additive and
/// multiplicative units. Cell states recur through fixed weight-1 links that
/// are not part of the weight vector. Output units are linear.
NetSpec make_lstm_spec(std::size_t n_in, std::size_t n_cells, std::size_t n_out);

/// Fully recurrent tanh network: inputs and bias feed every hidden unit,
/// hidden units feed each other over delay-1 links, outputs read hidden
/// units, inputs and bias at delay 0. Hidden units are labelled "h0", "h1", ...
NetSpec make_rnn_spec(std::size_t n_in, std::size_t n_hidden, std::size_t n_out,
                      Activation output_activation = Activation::tanh);

/// Line-delimited text form, one unit or link per line.
void write_net(std::ostream& out, const NetSpec& spec, const NetParams& params);
std::pair<NetSpec, NetParams> read_net(std::istream& in);

/// Stable 64-bit digest of topology and weights.
std::uint64_t net_hash(const NetSpec& spec, const NetParams& params);

}  // namespace cmrl::nn

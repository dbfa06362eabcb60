#pragma once

// The predictive world model M. It reads all(t) and predicts sense(t+1); its
// quality is measured as a two-part code length: the bits needed to describe
// its weights plus the bits needed to encode the residuals of its predictions
// on the stored history.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cmrl/history.hpp"
#include "cmrl/nn.hpp"
#include "cmrl/rng.hpp"

namespace cmrl {

enum class WeightCoding { gaussian, count_based };

struct CodingScheme {
  double sigma_e = 0.1;            // residual scale
  double delta_e = 1.0 / 256.0;    // residual quantisation step
  WeightCoding weight_coding = WeightCoding::gaussian;
  double sigma_w = 1.0;
  double delta_w = 1.0 / 256.0;
  int bits_per_weight = 16;
  double zero_weight_threshold = 1e-3;

  void validate() const;
  bool operator==(const CodingScheme&) const = default;
};

struct CodeLengthReport {
  double E = 0.0;       // summed squared prediction error
  double bits_H = 0.0;  // residual code length
  double bits_M = 0.0;  // model code length
  double total = 0.0;   // bits_M + bits_H
  std::size_t steps_scored = 0;
};

class WorldModel {
 public:
  WorldModel() = default;
  /// Takes an arbitrary network whose inputs are all(t) and whose outputs
  /// are the sense prediction.
  WorldModel(Dims dims, nn::NetSpec spec, nn::NetParams params, CodingScheme coding = {});

  /// Fully recurrent tanh model with `hidden` units and small random weights.
  static WorldModel create(Dims dims, std::size_t hidden, const CodingScheme& coding, Rng& rng);

  const Dims& dims() const { return dims_; }
  const nn::NetSpec& spec() const { return spec_; }
  const nn::NetParams& params() const { return params_; }
  const CodingScheme& coding() const { return coding_; }
  std::size_t hidden_size() const { return spec_.hidden().size(); }
  /// Labels of the hidden units in activation order; stable across growth
  /// and pruning, so controllers can track which unit is which.
  std::vector<std::string> hidden_labels() const;

  void set_params(nn::NetParams params);
  std::uint64_t hash() const { return nn::net_hash(spec_, params_); }

  void write(std::ostream& out) const;
  static WorldModel read(std::istream& in);

 private:
  Dims dims_;
  nn::NetSpec spec_;
  nn::NetParams params_;
  CodingScheme coding_;
};

/// M's full activation vector; hidden(t) and pred(t) are slices of it.
struct ModelState {
  std::vector<double> activations;
  bool operator==(const ModelState&) const = default;
};

ModelState reset_state(const WorldModel& model);
std::vector<double> hidden_of(const WorldModel& model, const ModelState& state);
std::vector<double> pred_of(const WorldModel& model, const ModelState& state);

struct Prediction {
  ModelState state;
  std::vector<double> pred;  // prediction of sense(t+1)
};

Prediction predict_step(const WorldModel& model, const ModelState& state, std::span<const double> all_t,
                        const nn::NetInjection* injection = nullptr);

/// Code length of one residual under the discretised Gaussian, clamped at 0.
double residual_bits(double residual, const CodingScheme& coding);
/// Code length of the learnable weights under the configured scheme.
double model_bits(std::span<const double> weights, const CodingScheme& coding);

/// Sum of squared prediction errors with M reset to zeros at the start of
/// every episode. The first step of an episode is scored against the reset
/// prediction (the zero vector).
double prediction_error(const WorldModel& model, std::span<const Episode> episodes);
double prediction_error(const WorldModel& model, const HistoryStore& history, std::span<const TrialSpan> spans);

CodeLengthReport code_length(const WorldModel& model, std::span<const Episode> episodes);
CodeLengthReport code_length(const WorldModel& model, const HistoryStore& history, std::span<const TrialSpan> spans);

struct SleepConfig {
  std::size_t epochs = 200;
  double learning_rate = 0.05;
  double l2 = 1e-4;        // lambda of the weight-decay term
  double grad_clip = 5.0;  // max gradient norm per update, 0 disables
};

struct SleepResult {
  WorldModel model;
  CodeLengthReport before;
  CodeLengthReport after;
  bool diverged = false;
  std::size_t epochs_run = 0;
};

/// Full-batch gradient descent on E + l2 * |w|^2: one update per epoch, with
/// the squared-error gradient averaged over every predicted step of every
/// episode. Episode order therefore has no effect. On a non-finite loss the
/// last finite model is returned with `diverged` set.
SleepResult sleep_train(const WorldModel& model, std::span<const Episode> episodes, const SleepConfig& cfg);
SleepResult sleep_train(const WorldModel& model, const HistoryStore& history, std::span<const TrialSpan> spans,
                        const SleepConfig& cfg);

std::vector<Episode> episodes_of(const HistoryStore& history, std::span<const TrialSpan> spans);

// ---- sequential network construction ----

enum class Mutation { add_unit, add_link, prune_link, prune_unit };
const char* to_string(Mutation mutation);

struct StructureConfig {
  double init_scale = 0.1;
  double fanin_probability = 0.5;
  double small_unit_threshold = 0.05;
};

struct StructuralProposal {
  WorldModel candidate;
  Mutation mutation = Mutation::add_unit;
};

std::vector<Mutation> applicable_mutations(const WorldModel& model, const StructureConfig& cfg = {});
/// Exactly one mutation, drawn uniformly from the applicable ones.
StructuralProposal propose_structural_change(const WorldModel& model, Rng& rng, const StructureConfig& cfg = {});

WorldModel add_hidden_unit(const WorldModel& model, Rng& rng, const StructureConfig& cfg = {});
std::optional<WorldModel> add_random_link(const WorldModel& model, Rng& rng, const StructureConfig& cfg = {});
/// Removes the learnable link with the smallest |w| whose removal keeps every
/// output reachable from the inputs.
std::optional<WorldModel> prune_smallest_link(const WorldModel& model);
std::optional<WorldModel> prune_small_unit(const WorldModel& model, const StructureConfig& cfg = {});

struct AcceptResult {
  WorldModel model;
  bool accepted = false;
  double incumbent_total = 0.0;
  double candidate_total = 0.0;
};

/// Retrains the candidate, then keeps it only if its total code length on
/// `scoring` is strictly below the incumbent's.
AcceptResult accept_if_shorter(const WorldModel& incumbent, const WorldModel& candidate,
                               std::span<const Episode> scoring, const SleepConfig& retrain);

}  // namespace cmrl

#pragma once

// C1: Q-learning with a linear approximator over named features.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cmrl/agent.hpp"
#include "cmrl/rng.hpp"

namespace cmrl {

struct QConfig {
  double alpha = 0.05;
  double gamma = 0.9;
  double epsilon_start = 0.3;
  double epsilon_end = 0.02;
  std::size_t epsilon_decay_steps = 20000;

  void validate() const;
};

/// Linear epsilon schedule, clamped at epsilon_end.
double epsilon_at(const QConfig& cfg, std::size_t step);

/// Q(s, a) = W[a] . [s, 1]. Features are named so the weights survive a
/// change in the feature set (M growing or losing hidden units).
class QFunction {
 public:
  QFunction() = default;
  QFunction(std::size_t actions, std::vector<std::string> feature_keys, double gamma, double alpha);

  std::size_t actions() const { return actions_; }
  std::size_t features() const { return keys_.size(); }
  const std::vector<std::string>& keys() const { return keys_; }
  double gamma() const { return gamma_; }
  double alpha() const { return alpha_; }
  /// Row-major actions x (features + 1); the last column is the bias.
  const std::vector<double>& weights() const { return weights_; }
  std::vector<double>& weights() { return weights_; }

  double value(std::span<const double> s, std::size_t a) const;
  /// Greedy action, lowest index among ties.
  std::size_t greedy(std::span<const double> s) const;
  double max_value(std::span<const double> s) const;

  /// Re-keys the feature columns; weights of surviving keys are kept, new
  /// keys start at 0.
  void remap(const std::vector<std::string>& keys);

  void write(std::ostream& out) const;
  static QFunction read(std::istream& in);
  bool operator==(const QFunction&) const = default;

 private:
  void check(std::span<const double> s) const;

  std::size_t actions_ = 0;
  std::vector<std::string> keys_;
  double gamma_ = 0.9;
  double alpha_ = 0.05;
  std::vector<double> weights_;
};

/// In-place update toward r + gamma * max_b Q(s', b); no bootstrap when
/// `terminal`.
void q_update(QFunction& q, std::span<const double> s, std::size_t a, double r, std::span<const double> s_next,
              bool terminal);
/// Value-returning form of q_update.
QFunction q_step(const QFunction& q, std::span<const double> s, std::size_t a, double r,
                 std::span<const double> s_next, bool terminal = false);
/// Adds alpha * bonus to Q(s, a) along the gradient, used to deliver reward
/// that arrives after the trial is over.
void q_bonus(QFunction& q, std::span<const double> s, std::size_t a, double bonus);

std::size_t epsilon_greedy(const QFunction& q, std::span<const double> s, double epsilon, Rng& rng);

/// Epsilon-greedy Q-learning agent over either raw sense(t) or the
/// Markovized state of M.
class QAgent : public Agent {
 public:
  /// `model` null means raw sense features. `step_counter` drives the
  /// epsilon schedule and is advanced per action when learning.
  QAgent(QFunction& q, const WorldModel* model, const Dims& dims, const QConfig& cfg, Rng& rng,
         std::size_t& step_counter, bool learn);

  void begin() override;
  std::size_t act(std::span<const double> sense) override;
  void end(std::span<const double> final_sense, bool truncated) override;

  /// Features and action of the last decision of the trial.
  const std::vector<double>& last_features() const { return prev_s_; }
  std::size_t last_action() const { return prev_a_; }

 private:
  std::vector<double> features(std::span<const double> sense) const;
  double reward_of(std::span<const double> sense) const;

  QFunction* q_;
  const WorldModel* model_;
  Dims dims_;
  QConfig cfg_;
  Rng* rng_;
  std::size_t* steps_;
  bool learn_;
  std::optional<MarkovTracker> tracker_;
  bool has_prev_ = false;
  std::vector<double> prev_s_;
  std::size_t prev_a_ = 0;
};

}  // namespace cmrl

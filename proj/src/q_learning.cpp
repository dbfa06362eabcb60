#include "cmrl/q_learning.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>

#include "cmrl/errors.hpp"
#include "cmrl/text_io.hpp"

namespace cmrl {

void QConfig::validate() const {
  if (!(alpha >= 0)) throw std::invalid_argument("q.alpha must be >= 0");
  if (!(gamma >= 0 && gamma < 1)) throw std::invalid_argument("q.gamma must be in [0, 1)");
  if (!(epsilon_start >= 0 && epsilon_start <= 1 && epsilon_end >= 0 && epsilon_end <= 1)) {
    throw std::invalid_argument("q.epsilon values must be in [0, 1]");
  }
}

double epsilon_at(const QConfig& cfg, std::size_t step) {
  if (cfg.epsilon_decay_steps == 0 || step >= cfg.epsilon_decay_steps) return cfg.epsilon_end;
  const double frac = static_cast<double>(step) / static_cast<double>(cfg.epsilon_decay_steps);
  return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac;
}

QFunction::QFunction(std::size_t actions, std::vector<std::string> feature_keys, double gamma, double alpha)
    : actions_(actions), keys_(std::move(feature_keys)), gamma_(gamma), alpha_(alpha) {
  if (actions_ == 0) throw std::invalid_argument("Q-function needs at least one action");
  if (!(gamma_ >= 0 && gamma_ < 1)) throw std::invalid_argument("gamma must be in [0, 1)");
  if (!(alpha_ >= 0)) throw std::invalid_argument("alpha must be >= 0");
  weights_.assign(actions_ * (keys_.size() + 1), 0.0);
}

void QFunction::check(std::span<const double> s) const {
  if (s.size() != keys_.size()) {
    throw DimensionError("state has " + std::to_string(s.size()) + " features, Q expects " +
                         std::to_string(keys_.size()));
  }
}

double QFunction::value(std::span<const double> s, std::size_t a) const {
  check(s);
  if (a >= actions_) throw std::out_of_range("action index out of range");
  const std::size_t stride = keys_.size() + 1;
  const double* w = weights_.data() + a * stride;
  double v = w[keys_.size()];
  for (std::size_t i = 0; i < s.size(); ++i) v += w[i] * s[i];
  return v;
}

std::size_t QFunction::greedy(std::span<const double> s) const {
  std::size_t best = 0;
  double best_v = value(s, 0);
  for (std::size_t a = 1; a < actions_; ++a) {
    const double v = value(s, a);
    if (v > best_v) {
      best = a;
      best_v = v;
    }
  }
  return best;
}

double QFunction::max_value(std::span<const double> s) const { return value(s, greedy(s)); }

void QFunction::remap(const std::vector<std::string>& keys) {
  std::map<std::string, std::size_t> old;
  for (std::size_t i = 0; i < keys_.size(); ++i) old.emplace(keys_[i], i);
  const std::size_t old_stride = keys_.size() + 1;
  const std::size_t stride = keys.size() + 1;
  std::vector<double> w(actions_ * stride, 0.0);
  for (std::size_t a = 0; a < actions_; ++a) {
    for (std::size_t i = 0; i < keys.size(); ++i) {
      auto it = old.find(keys[i]);
      if (it != old.end()) w[a * stride + i] = weights_[a * old_stride + it->second];
    }
    w[a * stride + keys.size()] = weights_[a * old_stride + keys_.size()];
  }
  keys_ = keys;
  weights_ = std::move(w);
}

void QFunction::write(std::ostream& out) const {
  out << "qfunction," << actions_ << ',' << keys_.size() << ',' << text::format_real(gamma_) << ','
      << text::format_real(alpha_) << '\n';
  out << "keys";
  for (const auto& k : keys_) out << ',' << k;
  out << '\n';
  const std::size_t stride = keys_.size() + 1;
  for (std::size_t a = 0; a < actions_; ++a) {
    std::string line = "row," + std::to_string(a);
    text::append_reals(line, std::span<const double>(weights_).subspan(a * stride, stride));
    out << line << '\n';
  }
}

QFunction QFunction::read(std::istream& in) {
  auto h = text::split_owned(text::expect_line(in, "Q-function header"));
  if (h.size() != 5 || h[0] != "qfunction") throw FormatError("bad Q-function header");
  const auto actions = static_cast<std::size_t>(text::parse_uint(h[1]));
  const auto nkeys = static_cast<std::size_t>(text::parse_uint(h[2]));
  auto k = text::split_owned(text::expect_line(in, "Q-function keys"));
  if (k.size() != nkeys + 1 || k[0] != "keys") throw FormatError("bad Q-function key line");
  std::vector<std::string> keys(k.begin() + 1, k.end());
  QFunction q(actions, std::move(keys), text::parse_real(h[3]), text::parse_real(h[4]));
  const std::size_t stride = nkeys + 1;
  for (std::size_t a = 0; a < actions; ++a) {
    auto row = text::split_owned(text::expect_line(in, "Q-function row"));
    if (row.size() != stride + 2 || row[0] != "row" || text::parse_uint(row[1]) != a) {
      throw FormatError("bad Q-function row");
    }
    auto values = text::parse_reals(row, 2, stride);
    std::copy(values.begin(), values.end(), q.weights_.begin() + static_cast<std::ptrdiff_t>(a * stride));
  }
  return q;
}

namespace {

void add_along(QFunction& q, std::span<const double> s, std::size_t a, double delta) {
  const std::size_t stride = q.features() + 1;
  double* w = q.weights().data() + a * stride;
  for (std::size_t i = 0; i < s.size(); ++i) w[i] += delta * s[i];
  w[q.features()] += delta;
}

}  // namespace

void q_update(QFunction& q, std::span<const double> s, std::size_t a, double r, std::span<const double> s_next,
              bool terminal) {
  const double target = terminal ? r : r + q.gamma() * q.max_value(s_next);
  const double td = target - q.value(s, a);
  add_along(q, s, a, q.alpha() * td);
}

QFunction q_step(const QFunction& q, std::span<const double> s, std::size_t a, double r,
                 std::span<const double> s_next, bool terminal) {
  QFunction next = q;
  q_update(next, s, a, r, s_next, terminal);
  return next;
}

void q_bonus(QFunction& q, std::span<const double> s, std::size_t a, double bonus) {
  q.value(s, a);  // validates
  add_along(q, s, a, q.alpha() * bonus);
}

std::size_t epsilon_greedy(const QFunction& q, std::span<const double> s, double epsilon, Rng& rng) {
  if (epsilon > 0.0 && uniform01(rng) < epsilon) return uniform_index(rng, q.actions());
  return q.greedy(s);
}

QAgent::QAgent(QFunction& q, const WorldModel* model, const Dims& dims, const QConfig& cfg, Rng& rng,
               std::size_t& step_counter, bool learn)
    : q_(&q), model_(model), dims_(dims), cfg_(cfg), rng_(&rng), steps_(&step_counter), learn_(learn) {
  if (model_) tracker_.emplace(*model_);
}

void QAgent::begin() {
  if (tracker_) tracker_->reset();
  has_prev_ = false;
}

std::vector<double> QAgent::features(std::span<const double> sense) const {
  if (tracker_) return tracker_->features(sense);
  return {sense.begin(), sense.end()};
}

double QAgent::reward_of(std::span<const double> sense) const {
  double r = 0.0;
  for (std::size_t i = dims_.m; i < sense.size(); ++i) r += sense[i];
  return r;
}

std::size_t QAgent::act(std::span<const double> sense) {
  auto s = features(sense);
  if (learn_ && has_prev_) q_update(*q_, prev_s_, prev_a_, reward_of(sense), s, false);
  const double eps = learn_ ? epsilon_at(cfg_, *steps_) : 0.0;
  const auto a = epsilon_greedy(*q_, s, eps, *rng_);
  if (learn_) ++*steps_;
  if (tracker_) tracker_->advance(sense, a);
  prev_s_ = std::move(s);
  prev_a_ = a;
  has_prev_ = true;
  return a;
}

void QAgent::end(std::span<const double> final_sense, bool truncated) {
  if (!learn_ || !has_prev_) return;
  auto s = features(final_sense);
  q_update(*q_, prev_s_, prev_a_, reward_of(final_sense), s, !truncated);
}

}  // namespace cmrl

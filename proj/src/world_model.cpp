#include "cmrl/world_model.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>

#include "cmrl/errors.hpp"
#include "cmrl/text_io.hpp"

namespace cmrl {

void CodingScheme::validate() const {
  if (!(sigma_e > 0) || !(delta_e > 0) || !(sigma_w > 0) || !(delta_w > 0) || !(zero_weight_threshold > 0)) {
    throw std::invalid_argument("coding scales must be positive");
  }
  if (delta_e > sigma_e || delta_w > sigma_w) throw std::invalid_argument("coding resolution must not exceed its scale");
  if (bits_per_weight < 0) throw std::invalid_argument("bits_per_weight must be non-negative");
}

WorldModel::WorldModel(Dims dims, nn::NetSpec spec, nn::NetParams params, CodingScheme coding)
    : dims_(dims), spec_(std::move(spec)), params_(std::move(params)), coding_(coding) {
  coding_.validate();
  if (spec_.inputs().size() != dims_.all()) throw DimensionError("world model needs m+n+o input units");
  if (spec_.outputs().size() != dims_.sense()) throw DimensionError("world model needs m+n output units");
  if (spec_.hidden().empty()) throw DimensionError("world model needs at least one hidden unit");
  if (params_.weights.size() != spec_.weight_count()) throw DimensionError("weights do not match the model spec");
}

WorldModel WorldModel::create(Dims dims, std::size_t hidden, const CodingScheme& coding, Rng& rng) {
  auto spec = nn::make_rnn_spec(dims.all(), hidden, dims.sense(), nn::Activation::tanh);
  auto params = nn::initial_params(spec, rng);
  return WorldModel(dims, std::move(spec), std::move(params), coding);
}

std::vector<std::string> WorldModel::hidden_labels() const {
  std::vector<std::string> labels;
  for (auto u : spec_.hidden()) labels.push_back(spec_.unit(u).label);
  return labels;
}

void WorldModel::set_params(nn::NetParams params) {
  if (params.weights.size() != spec_.weight_count()) throw DimensionError("weights do not match the model spec");
  params_ = std::move(params);
}

void WorldModel::write(std::ostream& out) const {
  out << "model,m=" << dims_.m << ",n=" << dims_.n << ",o=" << dims_.o << '\n';
  out << "coding," << text::format_real(coding_.sigma_e) << ',' << text::format_real(coding_.delta_e) << ','
      << (coding_.weight_coding == WeightCoding::gaussian ? "gaussian" : "count_based") << ','
      << text::format_real(coding_.sigma_w) << ',' << text::format_real(coding_.delta_w) << ','
      << coding_.bits_per_weight << ',' << text::format_real(coding_.zero_weight_threshold) << '\n';
  nn::write_net(out, spec_, params_);
}

WorldModel WorldModel::read(std::istream& in) {
  auto header = text::split_owned(text::expect_line(in, "model header"));
  if (header.size() != 4 || header[0] != "model") throw FormatError("not a model checkpoint");
  auto dim = [&](std::size_t i, std::string_view key) {
    auto f = header[i];
    if (f.substr(0, key.size() + 1) != std::string(key) + "=") throw FormatError("bad model header");
    return static_cast<std::size_t>(text::parse_uint(f.substr(key.size() + 1)));
  };
  Dims dims{dim(1, "m"), dim(2, "n"), dim(3, "o")};
  auto c = text::split_owned(text::expect_line(in, "coding header"));
  if (c.size() != 8 || c[0] != "coding") throw FormatError("bad coding header");
  CodingScheme coding;
  coding.sigma_e = text::parse_real(c[1]);
  coding.delta_e = text::parse_real(c[2]);
  if (c[3] == "gaussian") {
    coding.weight_coding = WeightCoding::gaussian;
  } else if (c[3] == "count_based") {
    coding.weight_coding = WeightCoding::count_based;
  } else {
    throw FormatError("unknown weight coding");
  }
  coding.sigma_w = text::parse_real(c[4]);
  coding.delta_w = text::parse_real(c[5]);
  coding.bits_per_weight = static_cast<int>(text::parse_int(c[6]));
  coding.zero_weight_threshold = text::parse_real(c[7]);
  auto [spec, params] = nn::read_net(in);
  try {
    return WorldModel(dims, std::move(spec), std::move(params), coding);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("inconsistent model checkpoint: ") + e.what());
  }
}

ModelState reset_state(const WorldModel& model) { return {std::vector<double>(model.spec().unit_count(), 0.0)}; }

std::vector<double> hidden_of(const WorldModel& model, const ModelState& state) {
  std::vector<double> h;
  for (auto u : model.spec().hidden()) h.push_back(state.activations.at(u));
  return h;
}

std::vector<double> pred_of(const WorldModel& model, const ModelState& state) {
  return nn::read_outputs(model.spec(), state.activations);
}

Prediction predict_step(const WorldModel& model, const ModelState& state, std::span<const double> all_t,
                        const nn::NetInjection* injection) {
  if (all_t.size() != model.dims().all()) {
    throw DimensionError("all(t) has " + std::to_string(all_t.size()) + " components, model expects " +
                         std::to_string(model.dims().all()));
  }
  Prediction p;
  p.state.activations = nn::forward_step(model.spec(), model.params(), state.activations, all_t, injection);
  p.pred = pred_of(model, p.state);
  return p;
}

double residual_bits(double residual, const CodingScheme& coding) {
  // -log2(delta * phi(d / sigma) / sigma) with phi the standard normal density.
  const double z = residual / coding.sigma_e;
  const double bits = std::log2(coding.sigma_e / coding.delta_e) + 0.5 * std::log2(2.0 * std::numbers::pi) +
                      z * z / (2.0 * std::numbers::ln2);
  return bits > 0.0 ? bits : 0.0;
}

double model_bits(std::span<const double> weights, const CodingScheme& coding) {
  double bits = 0.0;
  if (coding.weight_coding == WeightCoding::count_based) {
    std::size_t nonzero = 0;
    for (double w : weights) {
      if (std::abs(w) > coding.zero_weight_threshold) ++nonzero;
    }
    return static_cast<double>(coding.bits_per_weight) * static_cast<double>(nonzero);
  }
  const double base = std::log2(coding.sigma_w / coding.delta_w) + 0.5 * std::log2(2.0 * std::numbers::pi);
  for (double w : weights) {
    const double z = w / coding.sigma_w;
    const double b = base + z * z / (2.0 * std::numbers::ln2);
    if (b > 0.0) bits += b;
  }
  return bits;
}

namespace {

// Walks an episode, handing each (prediction, observed sense) pair to `visit`.
template <typename Visit>
void score_episode(const WorldModel& model, Episode episode, Visit&& visit) {
  ModelState state = reset_state(model);
  std::vector<double> pred(model.dims().sense(), 0.0);
  for (std::size_t k = 0; k < episode.size(); ++k) {
    const auto& rec = episode[k];
    const auto sense = rec.sense();
    visit(pred, sense);
    if (k + 1 < episode.size()) {
      auto next = predict_step(model, state, rec.all());
      state = std::move(next.state);
      pred = std::move(next.pred);
    }
  }
}

}  // namespace

double prediction_error(const WorldModel& model, std::span<const Episode> episodes) {
  double E = 0.0;
  for (const auto& ep : episodes) {
    score_episode(model, ep, [&](const std::vector<double>& pred, const std::vector<double>& sense) {
      for (std::size_t i = 0; i < sense.size(); ++i) {
        const double d = pred[i] - sense[i];
        E += d * d;
      }
    });
  }
  return E;
}

std::vector<Episode> episodes_of(const HistoryStore& history, std::span<const TrialSpan> spans) {
  std::vector<Episode> episodes;
  episodes.reserve(spans.size());
  for (const auto& span : spans) episodes.push_back(history.replay(span));
  return episodes;
}

double prediction_error(const WorldModel& model, const HistoryStore& history, std::span<const TrialSpan> spans) {
  return prediction_error(model, episodes_of(history, spans));
}

CodeLengthReport code_length(const WorldModel& model, std::span<const Episode> episodes) {
  CodeLengthReport report;
  for (const auto& ep : episodes) {
    score_episode(model, ep, [&](const std::vector<double>& pred, const std::vector<double>& sense) {
      for (std::size_t i = 0; i < sense.size(); ++i) {
        const double d = pred[i] - sense[i];
        report.E += d * d;
        report.bits_H += residual_bits(d, model.coding());
      }
      ++report.steps_scored;
    });
  }
  report.bits_M = model_bits(model.params().weights, model.coding());
  report.total = report.bits_M + report.bits_H;
  return report;
}

CodeLengthReport code_length(const WorldModel& model, const HistoryStore& history, std::span<const TrialSpan> spans) {
  return code_length(model, episodes_of(history, spans));
}

SleepResult sleep_train(const WorldModel& model, std::span<const Episode> episodes, const SleepConfig& cfg) {
  SleepResult result{model, code_length(model, episodes), {}, false, 0};
  const auto& spec = model.spec();
  nn::NetParams params = model.params();

  // Inputs and targets are fixed across epochs.
  struct Sequence {
    std::vector<std::vector<double>> inputs;
    std::vector<std::vector<double>> targets;
  };
  std::vector<Sequence> data;
  std::size_t steps = 0;
  for (const auto& ep : episodes) {
    if (ep.size() < 2) continue;  // nothing to predict
    Sequence seq;
    for (std::size_t k = 0; k + 1 < ep.size(); ++k) {
      seq.inputs.push_back(ep[k].all());
      seq.targets.push_back(ep[k + 1].sense());
    }
    steps += seq.inputs.size();
    data.push_back(std::move(seq));
  }

  // Full-batch descent: one update per epoch on the per-step mean gradient.
  for (std::size_t epoch = 0; epoch < cfg.epochs && !data.empty(); ++epoch) {
    std::vector<double> grad(params.weights.size(), 0.0);
    bool finite = true;
    for (const auto& seq : data) {
      nn::StepLoss loss = [&](std::size_t step, std::span<const double> out, std::span<double> d_out) {
        double l = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
          const double d = out[i] - seq.targets[step][i];
          l += d * d;
          d_out[i] = 2.0 * d;
        }
        return l;
      };
      try {
        const auto g = nn::bptt_gradient(spec, params, seq.inputs, loss);
        if (!std::isfinite(g.loss)) finite = false;
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g.gradient[i];
      } catch (const NumericError&) {
        finite = false;
      }
      if (!finite) break;
    }
    const double scale = 1.0 / static_cast<double>(steps);
    double norm2 = 0.0;
    for (std::size_t i = 0; i < grad.size() && finite; ++i) {
      grad[i] = grad[i] * scale + 2.0 * cfg.l2 * params.weights[i];
      norm2 += grad[i] * grad[i];
    }
    if (!finite || !std::isfinite(norm2)) {
      result.diverged = true;
      break;
    }
    const double norm = std::sqrt(norm2);
    if (cfg.grad_clip > 0.0 && norm > cfg.grad_clip) {
      for (auto& v : grad) v *= cfg.grad_clip / norm;
    }
    auto next = nn::sgd_step(params, grad, cfg.learning_rate);
    if (!std::all_of(next.weights.begin(), next.weights.end(), [](double w) { return std::isfinite(w); })) {
      result.diverged = true;
      break;
    }
    params = std::move(next);
    result.model.set_params(params);
    result.epochs_run = epoch + 1;
  }
  if (result.diverged) {
    try {
      result.after = code_length(result.model, episodes);
    } catch (const NumericError&) {
      result.after = result.before;
    }
  } else {
    result.after = code_length(result.model, episodes);
  }
  return result;
}

SleepResult sleep_train(const WorldModel& model, const HistoryStore& history, std::span<const TrialSpan> spans,
                        const SleepConfig& cfg) {
  return sleep_train(model, episodes_of(history, spans), cfg);
}

AcceptResult accept_if_shorter(const WorldModel& incumbent, const WorldModel& candidate,
                               std::span<const Episode> scoring, const SleepConfig& retrain) {
  AcceptResult result{incumbent, false, code_length(incumbent, scoring).total, 0.0};
  SleepResult trained = sleep_train(candidate, scoring, retrain);
  result.candidate_total = trained.after.total;
  if (!trained.diverged && result.candidate_total < result.incumbent_total) {
    result.model = std::move(trained.model);
    result.accepted = true;
  }
  return result;
}

}  // namespace cmrl

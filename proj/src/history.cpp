#include "cmrl/history.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include "cmrl/errors.hpp"
#include "cmrl/text_io.hpp"

namespace cmrl {

std::vector<double> StepRecord::sense() const {
  std::vector<double> s(in);
  s.insert(s.end(), r.begin(), r.end());
  return s;
}

std::vector<double> StepRecord::all() const {
  std::vector<double> a = sense();
  a.insert(a.end(), out.begin(), out.end());
  return a;
}

double StepRecord::total_reward() const {
  double total = 0.0;
  for (double v : r) total += v;
  return total;
}

void HistoryStore::begin_trial(std::string task_tag) {
  if (open_) throw SequencingError("begin_trial while trial " + std::to_string(trials_.size() + 1) + " is open");
  if (task_tag.find_first_of(",\n\r") != std::string::npos) throw std::invalid_argument("task tag contains a separator");
  open_ = true;
  open_start_ = records_.size() + 1;
  open_tag_ = std::move(task_tag);
}

void HistoryStore::append(StepRecord record) {
  if (!open_) throw SequencingError("append outside of a trial");
  if (record.t != records_.size() + 1) {
    throw SequencingError("expected t=" + std::to_string(records_.size() + 1) + ", got t=" + std::to_string(record.t));
  }
  if (record.in.size() != dims_.m || record.r.size() != dims_.n || record.out.size() != dims_.o) {
    throw DimensionError("record dimensions do not match the run's (m, n, o)");
  }
  const double previous = cumulative_.empty() ? 0.0 : cumulative_.back();
  cumulative_.push_back(previous + record.total_reward());
  records_.push_back(std::move(record));
}

const TrialSpan& HistoryStore::end_trial() {
  if (!open_) throw SequencingError("end_trial without an open trial");
  if (records_.size() < open_start_) throw SequencingError("a trial needs at least one record");
  TrialSpan span;
  span.trial_id = trials_.size() + 1;
  span.t_a = open_start_;
  span.t_b = records_.size();
  span.task_tag = open_tag_;
  for (auto t = span.t_a; t <= span.t_b; ++t) span.external_return += records_[t - 1].total_reward();
  trials_.push_back(std::move(span));
  credited_.push_back(false);
  open_ = false;
  open_tag_.clear();
  return trials_.back();
}

const StepRecord& HistoryStore::record(std::uint64_t t) const {
  if (t == 0 || t > records_.size()) throw std::out_of_range("time index " + std::to_string(t) + " out of range");
  return records_[t - 1];
}

const TrialSpan& HistoryStore::trial(std::size_t trial_id) const {
  if (trial_id == 0 || trial_id > trials_.size()) {
    throw std::out_of_range("unknown trial id " + std::to_string(trial_id));
  }
  return trials_[trial_id - 1];
}

const TrialSpan& HistoryStore::latest_trial() const {
  if (trials_.empty()) throw ContractError("history holds no completed trial");
  return trials_.back();
}

double HistoryStore::total_reward(std::uint64_t t) const { return record(t).total_reward(); }

double HistoryStore::cumulative_reward(std::uint64_t t) const {
  if (t > records_.size()) throw std::out_of_range("time index " + std::to_string(t) + " out of range");
  return t == 0 ? 0.0 : cumulative_[t - 1];
}

std::vector<TrialSpan> HistoryStore::sample_trials(std::size_t k, ReplayRule rule, Rng& rng) const {
  if (trials_.empty()) throw ContractError("cannot sample from a history without completed trials");
  const std::size_t count = trials_.size();
  const std::size_t take = std::min(k, count);
  std::vector<std::size_t> pool(count);
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<std::size_t> chosen;
  std::size_t remaining = count;
  if (rule == ReplayRule::always_include_latest && take > 0) {
    chosen.push_back(count - 1);
    --remaining;  // the latest sits at the end of the pool and is never drawn again
  }
  // Partial Fisher-Yates over the first `remaining` entries.
  for (std::size_t i = 0; chosen.size() < take; ++i) {
    const std::size_t j = i + uniform_index(rng, remaining - i);
    std::swap(pool[i], pool[j]);
    chosen.push_back(pool[i]);
  }
  std::sort(chosen.begin(), chosen.end());
  std::vector<TrialSpan> spans;
  spans.reserve(chosen.size());
  for (auto idx : chosen) spans.push_back(trials_[idx]);
  return spans;
}

Episode HistoryStore::replay(const TrialSpan& span) const {
  const auto& stored = trial(span.trial_id);
  if (stored.t_a != span.t_a || stored.t_b != span.t_b) throw ContractError("span does not match the stored trial");
  return Episode(records_).subspan(span.t_a - 1, span.length());
}

Episode HistoryStore::replay(std::size_t trial_id) const { return replay(trial(trial_id)); }

void HistoryStore::credit_intrinsic(std::size_t trial_id, double value) {
  const auto& span = trial(trial_id);
  if (credited_[trial_id - 1]) throw SequencingError("trial " + std::to_string(trial_id) + " already credited");
  records_[span.t_b - 1].intrinsic = value;
  credited_[trial_id - 1] = true;
}

double HistoryStore::intrinsic_return(std::size_t trial_id) const {
  double total = 0.0;
  for (const auto& rec : replay(trial_id)) total += rec.intrinsic;
  return total;
}

void HistoryStore::write(std::ostream& out) const {
  out << "history,m=" << dims_.m << ",n=" << dims_.n << ",o=" << dims_.o << ",seed=" << seed_ << '\n';
  std::string line;
  auto write_records = [&](std::uint64_t from, std::uint64_t to) {
    for (auto t = from; t <= to; ++t) {
      const auto& rec = records_[t - 1];
      line = "step," + std::to_string(rec.t);
      text::append_reals(line, rec.in);
      text::append_reals(line, rec.r);
      text::append_reals(line, rec.out);
      line += ',';
      line += text::format_real(rec.intrinsic);
      out << line << '\n';
    }
  };
  for (const auto& span : trials_) {
    out << "trial," << span.trial_id << ',' << span.task_tag << '\n';
    write_records(span.t_a, span.t_b);
    out << "done," << span.trial_id << ',' << (credited_[span.trial_id - 1] ? 1 : 0) << '\n';
  }
  if (open_) {
    out << "trial," << trials_.size() + 1 << ',' << open_tag_ << '\n';
    write_records(open_start_, records_.size());
  }
  out << "end," << records_.size() << ',' << trials_.size() << '\n';
}

namespace {

std::uint64_t header_value(std::string_view field, std::string_view key) {
  if (field.substr(0, key.size()) != key || field.size() <= key.size() || field[key.size()] != '=') {
    throw FormatError("history header: expected " + std::string(key) + "=...");
  }
  return text::parse_uint(field.substr(key.size() + 1));
}

}  // namespace

HistoryStore HistoryStore::read(std::istream& in) {
  auto header_line = text::expect_line(in, "history header");
  auto header = text::split(header_line);
  if (header.size() != 5 || header[0] != "history") throw FormatError("not a history file");
  Dims dims{header_value(header[1], "m"), header_value(header[2], "n"), header_value(header[3], "o")};
  HistoryStore store(dims, header_value(header[4], "seed"));
  const std::size_t step_fields = 2 + dims.all() + 1;

  std::string line;
  bool finished = false;
  while (text::next_line(in, line)) {
    auto f = text::split(line);
    if (f[0] == "trial") {
      if (f.size() != 3 || text::parse_uint(f[1]) != store.trials_.size() + 1) throw FormatError("bad trial line");
      store.begin_trial(std::string(f[2]));
    } else if (f[0] == "step") {
      if (f.size() != step_fields) throw FormatError("step line has wrong field count at t=" + std::string(f[1]));
      StepRecord rec;
      rec.t = text::parse_uint(f[1]);
      rec.in = text::parse_reals(f, 2, dims.m);
      rec.r = text::parse_reals(f, 2 + dims.m, dims.n);
      rec.out = text::parse_reals(f, 2 + dims.m + dims.n, dims.o);
      rec.intrinsic = text::parse_real(f[step_fields - 1]);
      store.append(std::move(rec));
    } else if (f[0] == "done") {
      if (f.size() != 3) throw FormatError("bad done line");
      const auto& span = store.end_trial();
      if (span.trial_id != text::parse_uint(f[1])) throw FormatError("done line closes the wrong trial");
      store.credited_.back() = f[2] == "1";
    } else if (f[0] == "end") {
      if (f.size() != 3 || text::parse_uint(f[1]) != store.length() || text::parse_uint(f[2]) != store.trial_count()) {
        throw FormatError("history footer does not match the content");
      }
      finished = true;
      break;
    } else {
      throw FormatError("unexpected history line '" + line + "'");
    }
  }
  if (!finished) throw FormatError("history file is truncated (no end line)");
  return store;
}

void HistoryStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write(out);
  if (!out) throw std::runtime_error("error writing " + path.string());
}

HistoryStore HistoryStore::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return read(in);
}

void HistoryStore::export_returns(std::ostream& out) const {
  out << "trial_id,external_return,intrinsic_return\n";
  for (const auto& span : trials_) {
    out << span.trial_id << ',' << text::format_real(span.external_return) << ','
        << text::format_real(intrinsic_return(span.trial_id)) << '\n';
  }
}

}  // namespace cmrl

#pragma once

// The lifelong interaction history: every observation, reward and action of
// every trial, append-only and never discarded.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cmrl/rng.hpp"

namespace cmrl {

/// Channel sizes of a run: m observation, n reward and o action components.
struct Dims {
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t o = 0;

  std::size_t sense() const { return m + n; }
  std::size_t all() const { return m + n + o; }
  bool operator==(const Dims&) const = default;
};

/// One time step: in(t), r(t), out(t), plus the curiosity reward credited to it.
struct StepRecord {
  std::uint64_t t = 0;
  std::vector<double> in;
  std::vector<double> r;
  std::vector<double> out;
  double intrinsic = 0.0;

  /// sense(t) = in(t) followed by r(t).
  std::vector<double> sense() const;
  /// all(t) = sense(t) followed by out(t).
  std::vector<double> all() const;
  double total_reward() const;

  bool operator==(const StepRecord&) const = default;
};

struct TrialSpan {
  std::size_t trial_id = 0;  // 1-based
  std::uint64_t t_a = 0;
  std::uint64_t t_b = 0;
  std::string task_tag;
  double external_return = 0.0;

  std::size_t length() const { return static_cast<std::size_t>(t_b - t_a + 1); }
  bool operator==(const TrialSpan&) const = default;
};

enum class ReplayRule { uniform_random, always_include_latest };

/// A contiguous run of records, e.g. one trial. Used by scoring and training,
/// which also accept episodes that were never stored.
using Episode = std::span<const StepRecord>;

class HistoryStore {
 public:
  HistoryStore() = default;
  HistoryStore(Dims dims, std::uint64_t seed) : dims_(dims), seed_(seed) {}

  const Dims& dims() const { return dims_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t length() const { return records_.size(); }
  std::size_t trial_count() const { return trials_.size(); }
  bool trial_open() const { return open_; }

  /// Opens a new trial; records appended until end_trial() belong to it.
  void begin_trial(std::string task_tag);
  /// Appends the next record. Its t must equal length() + 1.
  void append(StepRecord record);
  /// Closes the open trial and returns its span.
  const TrialSpan& end_trial();

  const StepRecord& record(std::uint64_t t) const;
  std::span<const StepRecord> records() const { return records_; }
  const std::vector<TrialSpan>& trials() const { return trials_; }
  const TrialSpan& trial(std::size_t trial_id) const;
  const TrialSpan& latest_trial() const;

  /// R(t), the summed reward channels at time t.
  double total_reward(std::uint64_t t) const;
  /// CR(t), the sum of R over 1..t.
  double cumulative_reward(std::uint64_t t) const;

  /// min(k, #trials) distinct completed trials, in ascending id order.
  std::vector<TrialSpan> sample_trials(std::size_t k, ReplayRule rule, Rng& rng) const;

  /// The stored records of one trial, in order.
  Episode replay(const TrialSpan& span) const;
  Episode replay(std::size_t trial_id) const;

  /// Sets the intrinsic reward of a completed trial's final record. Each
  /// trial may be credited once; the sensory-motor data is never touched.
  void credit_intrinsic(std::size_t trial_id, double value);
  bool credited(std::size_t trial_id) const { return credited_.at(trial_id - 1); }
  double intrinsic_return(std::size_t trial_id) const;

  void write(std::ostream& out) const;
  static HistoryStore read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static HistoryStore load(const std::filesystem::path& path);

  /// trial_id,external_return,intrinsic_return rows with a header line.
  void export_returns(std::ostream& out) const;

  bool operator==(const HistoryStore&) const = default;

 private:
  Dims dims_;
  std::uint64_t seed_ = 0;
  std::vector<StepRecord> records_;
  std::vector<double> cumulative_;
  std::vector<TrialSpan> trials_;
  std::vector<bool> credited_;
  bool open_ = false;
  std::uint64_t open_start_ = 0;
  std::string open_tag_;
};

}  // namespace cmrl

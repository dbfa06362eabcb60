#include <doctest.h>

#include <filesystem>
#include <map>
#include <sstream>

#include "cmrl/errors.hpp"
#include "cmrl/history.hpp"

using namespace cmrl;

namespace {

StepRecord rec(std::uint64_t t, std::vector<double> in, std::vector<double> r, std::vector<double> out) {
  return {t, std::move(in), std::move(r), std::move(out), 0.0};
}

// n trials of `len` random steps each.
HistoryStore random_store(Dims dims, std::size_t trials, std::size_t len, std::uint64_t seed) {
  HistoryStore h(dims, seed);
  Rng rng(seed);
  auto vec = [&](std::size_t k) {
    std::vector<double> v(k);
    for (auto& x : v) x = uniform(rng, -1.0, 1.0);
    return v;
  };
  for (std::size_t i = 0; i < trials; ++i) {
    h.begin_trial("task");
    for (std::size_t k = 0; k < len; ++k) h.append(rec(h.length() + 1, vec(dims.m), vec(dims.n), vec(dims.o)));
    h.end_trial();
  }
  return h;
}

}  // namespace

TEST_CASE("append: length grows and order is enforced") {
  HistoryStore h({1, 1, 1}, 0);
  h.begin_trial("t");
  h.append(rec(1, {0.1}, {0.0}, {1.0}));
  CHECK(h.length() == 1);
  CHECK_THROWS_AS(h.append(rec(3, {0.1}, {0.0}, {1.0})), SequencingError);
  CHECK_THROWS_AS(h.append(rec(1, {0.1}, {0.0}, {1.0})), SequencingError);
  CHECK_THROWS_AS(h.append(rec(2, {0.1, 0.2}, {0.0}, {1.0})), DimensionError);
  CHECK(h.length() == 1);
}

TEST_CASE("append: outside a trial is rejected") {
  HistoryStore h({1, 1, 1}, 0);
  CHECK_THROWS_AS(h.append(rec(1, {0.0}, {0.0}, {0.0})), SequencingError);
  h.begin_trial("t");
  CHECK_THROWS_AS(h.begin_trial("u"), SequencingError);
}

TEST_CASE("append: 10,000 records read back identically") {
  const Dims dims{3, 2, 2};
  HistoryStore h(dims, 5);
  Rng rng(5);
  std::vector<StepRecord> written;
  h.begin_trial("long");
  for (std::uint64_t t = 1; t <= 10000; ++t) {
    StepRecord r{t, {uniform01(rng), normal(rng), -1.0}, {uniform01(rng), 0.0}, {0.0, 1.0}, 0.0};
    written.push_back(r);
    h.append(r);
  }
  h.end_trial();
  const auto back = h.records();
  REQUIRE(back.size() == written.size());
  for (std::size_t i = 0; i < written.size(); ++i) CHECK(back[i] == written[i]);
}

TEST_CASE("total_reward and cumulative_reward") {
  SUBCASE("zero rewards") {
    HistoryStore h({1, 1, 1}, 0);
    h.begin_trial("z");
    for (std::uint64_t t = 1; t <= 5; ++t) h.append(rec(t, {1.0}, {0.0}, {0.0}));
    h.end_trial();
    for (std::uint64_t t = 0; t <= 5; ++t) CHECK(h.cumulative_reward(t) == 0.0);
  }
  SUBCASE("two reward channels") {
    HistoryStore h({1, 2, 1}, 0);
    h.begin_trial("r");
    h.append(rec(1, {0.0}, {1.0, 0.5}, {0.0}));
    h.append(rec(2, {0.0}, {0.0, 0.25}, {0.0}));
    h.end_trial();
    CHECK(h.total_reward(1) == 1.5);
    // R(2) = 0.25, so CR(2) = 1.5 + 0.25.
    CHECK(h.total_reward(2) == 0.25);
    CHECK(h.cumulative_reward(2) == 1.75);
    CHECK_THROWS_AS(h.total_reward(3), std::out_of_range);
    CHECK_THROWS_AS(h.cumulative_reward(3), std::out_of_range);
  }
  SUBCASE("random store against a brute-force sum") {
    const auto h = random_store({2, 3, 1}, 10, 10, 77);
    REQUIRE(h.length() == 100);
    long double brute = 0.0L;
    for (const auto& r : h.records()) {
      for (double x : r.r) brute += x;
    }
    CHECK(h.cumulative_reward(100) == doctest::Approx(static_cast<double>(brute)).epsilon(1e-12));
  }
}

TEST_CASE("cumulative_reward is non-decreasing for non-negative rewards") {
  HistoryStore h({1, 2, 1}, 0);
  Rng rng(3);
  h.begin_trial("pos");
  for (std::uint64_t t = 1; t <= 200; ++t) h.append(rec(t, {0.0}, {uniform01(rng), uniform01(rng)}, {0.0}));
  h.end_trial();
  for (std::uint64_t t = 1; t <= 200; ++t) CHECK(h.cumulative_reward(t) >= h.cumulative_reward(t - 1));
}

TEST_CASE("trial spans partition the timeline") {
  const auto h = random_store({1, 1, 1}, 7, 4, 1);
  std::uint64_t next = 1;
  for (const auto& s : h.trials()) {
    CHECK(s.t_a == next);
    CHECK(s.t_a <= s.t_b);
    next = s.t_b + 1;
  }
  CHECK(next == h.length() + 1);
  CHECK(h.latest_trial().trial_id == 7);
}

TEST_CASE("trial external_return sums the trial's rewards") {
  HistoryStore h({1, 2, 1}, 0);
  h.begin_trial("a");
  h.append(rec(1, {0.0}, {1.0, -0.5}, {0.0}));
  h.append(rec(2, {0.0}, {0.25, 0.0}, {0.0}));
  const auto span = h.end_trial();
  CHECK(span.external_return == 0.75);
}

TEST_CASE("sample_trials") {
  Rng rng(9);
  SUBCASE("one stored trial") {
    const auto h = random_store({1, 1, 1}, 1, 3, 2);
    const auto s = h.sample_trials(5, ReplayRule::uniform_random, rng);
    REQUIRE(s.size() == 1);
    CHECK(s[0].trial_id == 1);
  }
  SUBCASE("always_include_latest keeps the last trial") {
    const auto h = random_store({1, 1, 1}, 10, 2, 2);
    for (int i = 0; i < 200; ++i) {
      const auto s = h.sample_trials(3, ReplayRule::always_include_latest, rng);
      REQUIRE(s.size() == 3);
      CHECK(s.back().trial_id == 10);
      CHECK(s[0].trial_id < s[1].trial_id);
      CHECK(s[1].trial_id < s[2].trial_id);
    }
  }
  SUBCASE("uniform_random inclusion frequency is 30% for k=3 of 10") {
    const auto h = random_store({1, 1, 1}, 10, 2, 2);
    std::map<std::size_t, int> counts;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
      for (const auto& s : h.sample_trials(3, ReplayRule::uniform_random, rng)) ++counts[s.trial_id];
    }
    for (std::size_t id = 1; id <= 10; ++id) CHECK(std::abs(counts[id] / double(draws) - 0.3) < 0.02);
  }
  SUBCASE("empty store") {
    HistoryStore h({1, 1, 1}, 0);
    CHECK_THROWS_AS(h.sample_trials(1, ReplayRule::uniform_random, rng), ContractError);
  }
}

TEST_CASE("replay") {
  SUBCASE("one-step trial with empty payload") {
    HistoryStore h({1, 1, 1}, 0);
    h.begin_trial("tiny");
    h.append(rec(1, {0.0}, {0.0}, {0.0}));
    const auto span = h.end_trial();
    const auto ep = h.replay(span);
    REQUIRE(ep.size() == 1);
    CHECK(ep[0] == rec(1, {0.0}, {0.0}, {0.0}));
  }
  SUBCASE("full trial in order") {
    const auto h = random_store({2, 1, 2}, 3, 5, 4);
    const auto ep = h.replay(2);
    REQUIRE(ep.size() == 5);
    for (std::size_t k = 0; k < 5; ++k) CHECK(ep[k] == h.record(6 + k));
  }
  SUBCASE("unknown id") {
    const auto h = random_store({1, 1, 1}, 2, 2, 4);
    CHECK_THROWS_AS(h.replay(3), std::out_of_range);
    TrialSpan forged = h.trial(1);
    forged.t_b += 1;
    CHECK_THROWS_AS(h.replay(forged), ContractError);
  }
}

TEST_CASE("intrinsic credit is separate from the sensory-motor data") {
  auto h = random_store({1, 1, 1}, 2, 3, 6);
  const auto before = h.trial(1).external_return;
  const auto r_before = h.record(3).r;
  h.credit_intrinsic(1, 2.5);
  CHECK(h.record(3).intrinsic == 2.5);
  CHECK(h.record(3).r == r_before);
  CHECK(h.trial(1).external_return == before);
  CHECK(h.intrinsic_return(1) == 2.5);
  CHECK_THROWS_AS(h.credit_intrinsic(1, 1.0), SequencingError);
}

TEST_CASE("persistence round trip replays bit-identically") {
  auto h = random_store({3, 1, 2}, 5, 7, 12);
  h.credit_intrinsic(2, 0.125);
  std::stringstream ss;
  h.write(ss);
  const auto back = HistoryStore::read(ss);
  CHECK(back == h);
  for (std::size_t id = 1; id <= 5; ++id) {
    const auto a = h.replay(id);
    const auto b = back.replay(id);
    CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
  }
  const auto path = std::filesystem::temp_directory_path() / "cmrl_history_roundtrip.txt";
  h.save(path);
  CHECK(HistoryStore::load(path) == h);
  std::filesystem::remove(path);
}

TEST_CASE("read rejects truncated and malformed files") {
  const auto h = random_store({1, 1, 1}, 2, 2, 1);
  std::stringstream ss;
  h.write(ss);
  const auto full = ss.str();
  std::stringstream truncated(full.substr(0, full.rfind("end")));
  CHECK_THROWS_AS(HistoryStore::read(truncated), FormatError);
  std::stringstream garbage("history,m=1,n=1,o=1,seed=0\nstep,1,x\n");
  CHECK_THROWS_AS(HistoryStore::read(garbage), FormatError);
  std::stringstream other("model,m=1,n=1,o=1\n");
  CHECK_THROWS_AS(HistoryStore::read(other), FormatError);
}

TEST_CASE("export_returns writes one row per trial") {
  auto h = random_store({1, 1, 1}, 3, 2, 8);
  h.credit_intrinsic(3, 1.5);
  std::stringstream ss;
  h.export_returns(ss);
  std::string line;
  std::getline(ss, line);
  CHECK(line == "trial_id,external_return,intrinsic_return");
  int rows = 0;
  while (std::getline(ss, line)) ++rows;
  CHECK(rows == 3);
}

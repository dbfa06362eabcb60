// Run checkpoints: one text file per component in a directory. Files are
// written to a temporary name and renamed into place.

#include <fstream>
#include <sstream>

#include "cmrl/errors.hpp"
#include "cmrl/orchestrator.hpp"
#include "cmrl/text_io.hpp"

namespace cmrl {

namespace {

namespace fs = std::filesystem;
using text::format_real;

template <typename Writer>
void write_file(const fs::path& path, Writer&& writer) {
  const auto tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    writer(out);
    if (!out) throw std::runtime_error("error writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::ifstream open(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("checkpoint file missing: " + path.string());
  return in;
}

void write_state(std::ostream& out, const RunState& st) {
  out << "state," << st.phase << ',' << (st.stopped ? 1 : 0) << ',' << st.q_steps << ',' << format_real(st.sigma)
      << '\n';
  for (const auto& r : st.reports) {
    out << "report," << r.phase << ',' << format_real(r.controller_metric) << ',' << format_real(r.mean_return) << ','
        << format_real(r.code.E) << ',' << format_real(r.code.bits_M) << ',' << format_real(r.code.bits_H) << ','
        << format_real(r.code.total) << ',' << r.code.steps_scored << ',' << format_real(r.intrinsic_total) << ','
        << r.hidden << ',' << r.mutation << ',' << (r.accepted ? 1 : 0) << ',' << (r.diverged ? 1 : 0) << ','
        << r.model_hash << ',' << format_real(r.seconds) << '\n';
  }
  for (const auto& r : st.evolution_log) {
    out << "evolution," << r.phase << ',' << r.log.generation << ',' << format_real(r.log.best) << ','
        << format_real(r.log.mean) << '\n';
  }
  for (const auto& r : st.curiosity_log) {
    out << "curiosity," << r.phase << ',' << r.trial_id << ',' << format_real(r.bits_before) << ','
        << format_real(r.bits_after) << ',' << format_real(r.intrinsic) << '\n';
  }
  out << "end\n";
}

void read_state(std::istream& in, RunState& st) {
  auto h = text::split_owned(text::expect_line(in, "state header"));
  if (h.size() != 5 || h[0] != "state") throw FormatError("bad state header");
  st.phase = static_cast<std::size_t>(text::parse_uint(h[1]));
  st.stopped = h[2] == "1";
  st.q_steps = static_cast<std::size_t>(text::parse_uint(h[3]));
  st.sigma = text::parse_real(h[4]);
  std::string line;
  bool finished = false;
  while (text::next_line(in, line)) {
    auto f = text::split(line);
    if (f[0] == "report" && f.size() == 16) {
      PhaseReport r;
      r.phase = static_cast<std::size_t>(text::parse_uint(f[1]));
      r.controller_metric = text::parse_real(f[2]);
      r.mean_return = text::parse_real(f[3]);
      r.code.E = text::parse_real(f[4]);
      r.code.bits_M = text::parse_real(f[5]);
      r.code.bits_H = text::parse_real(f[6]);
      r.code.total = text::parse_real(f[7]);
      r.code.steps_scored = static_cast<std::size_t>(text::parse_uint(f[8]));
      r.intrinsic_total = text::parse_real(f[9]);
      r.hidden = static_cast<std::size_t>(text::parse_uint(f[10]));
      r.mutation = std::string(f[11]);
      r.accepted = f[12] == "1";
      r.diverged = f[13] == "1";
      r.model_hash = text::parse_uint(f[14]);
      r.seconds = text::parse_real(f[15]);
      st.reports.push_back(r);
    } else if (f[0] == "evolution" && f.size() == 5) {
      EvolutionRow r;
      r.phase = static_cast<std::size_t>(text::parse_uint(f[1]));
      r.log.generation = static_cast<std::size_t>(text::parse_uint(f[2]));
      r.log.best = text::parse_real(f[3]);
      r.log.mean = text::parse_real(f[4]);
      st.evolution_log.push_back(r);
    } else if (f[0] == "curiosity" && f.size() == 6) {
      CuriosityRow r;
      r.phase = static_cast<std::size_t>(text::parse_uint(f[1]));
      r.trial_id = static_cast<std::size_t>(text::parse_uint(f[2]));
      r.bits_before = text::parse_real(f[3]);
      r.bits_after = text::parse_real(f[4]);
      r.intrinsic = text::parse_real(f[5]);
      st.curiosity_log.push_back(r);
    } else if (f[0] == "end" && f.size() == 1) {
      finished = true;
      break;
    } else {
      throw FormatError("unexpected state line '" + line + "'");
    }
  }
  if (!finished) throw FormatError("state file is truncated (no end line)");
  if (st.reports.size() != st.phase) throw FormatError("state file has a report count different from its phase");
}

void write_controller(std::ostream& out, const RunState& st) {
  out << "controller," << to_string(st.cfg.variant) << '\n';
  switch (st.cfg.variant) {
    case Variant::C1:
      st.q.write(out);
      return;
    case Variant::C2:
      write_policy(out, st.policy);
      break;
    case Variant::C3:
      write_cm(out, st.cm);
      break;
  }
  write_genomes(out, {st.best});
  write_genomes(out, st.population);
}

void read_controller(std::istream& in, RunState& st) {
  auto h = text::split_owned(text::expect_line(in, "controller header"));
  if (h.size() != 2 || h[0] != "controller" || h[1] != to_string(st.cfg.variant)) {
    throw FormatError("controller file does not match the configured variant");
  }
  switch (st.cfg.variant) {
    case Variant::C1:
      st.q = QFunction::read(in);
      return;
    case Variant::C2:
      st.policy = read_policy(in);
      break;
    case Variant::C3:
      st.cm = read_cm(in);
      break;
  }
  auto best = read_genomes(in);
  if (best.size() != 1) throw FormatError("controller file must hold exactly one best genome");
  st.best = best.front();
  st.population = read_genomes(in);
}

}  // namespace

void save_checkpoint(const RunState& st, const fs::path& dir) {
  fs::create_directories(dir);
  write_file(dir / "config.txt", [&](std::ostream& out) { write_config(out, st.cfg); });
  write_file(dir / "history.txt", [&](std::ostream& out) { st.history.write(out); });
  write_file(dir / "model.txt", [&](std::ostream& out) { st.model.write(out); });
  write_file(dir / "controller.txt", [&](std::ostream& out) { write_controller(out, st); });
  write_file(dir / "rng.txt", [&](std::ostream& out) { st.streams.write(out); });
  write_file(dir / "trials.csv", [&](std::ostream& out) { export_metrics(st, MetricsTable::trials, out); });
  write_file(dir / "phases.csv", [&](std::ostream& out) { export_metrics(st, MetricsTable::phases, out); });
  write_file(dir / "evolution.csv", [&](std::ostream& out) { export_metrics(st, MetricsTable::evolution, out); });
  write_file(dir / "curiosity.csv", [&](std::ostream& out) { export_metrics(st, MetricsTable::curiosity, out); });
  // Written last: a directory without state.txt is not a complete checkpoint.
  write_file(dir / "state.txt", [&](std::ostream& out) { write_state(out, st); });
}

RunState load_checkpoint(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw FormatError("checkpoint directory not found: " + dir.string());
  RunState st;
  st.cfg = load_config(dir / "config.txt");
  st.env = make_env(st.cfg.env_name, st.cfg.env_params, derive_seed(st.cfg.seed, "env-spec"));
  {
    auto in = open(dir / "history.txt");
    st.history = HistoryStore::read(in);
  }
  if (st.history.dims() != st.env.dims) {
    throw FormatError("history channel sizes (m, n, o) do not match the configured environment");
  }
  {
    auto in = open(dir / "model.txt");
    st.model = WorldModel::read(in);
  }
  if (st.model.dims() != st.env.dims) {
    throw FormatError("model channel sizes (m, n, o) do not match the configured environment");
  }
  {
    auto in = open(dir / "controller.txt");
    read_controller(in, st);
  }
  {
    auto in = open(dir / "rng.txt");
    st.streams = StreamSet::read(in);
  }
  if (st.streams.master() != st.cfg.seed) throw FormatError("random streams were seeded from a different master seed");
  {
    auto in = open(dir / "state.txt");
    read_state(in, st);
  }
  return st;
}

}  // namespace cmrl

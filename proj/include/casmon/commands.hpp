#ifndef CASMON_COMMANDS_HPP
#define CASMON_COMMANDS_HPP

#include "casmon/config.hpp"
#include "casmon/evaluation.hpp"
#include "casmon/monitor.hpp"
#include "casmon/simulator.hpp"
#include "casmon/trace.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace casmon {

/// Exit statuses shared by the detection commands.
enum ExitCode : int { kExitClean = 0, kExitCascade = 1, kExitError = 2 };

namespace detail {

/// Feeds turns to a monitor created on the header, writing one diagnostics
/// line per turn and one alert line per declaration.
class DetectSession {
 public:
  DetectSession(const RunConfig& cfg, std::ostream& alerts, std::ostream& diagnostics)
      : cfg_(cfg), alerts_(alerts), diagnostics_(diagnostics) {}

  void turn(const TraceHeader& header, const TurnEvents& te) {
    if (!monitor_) monitor_.emplace(header, cfg_.monitor);
    for (const auto& o : monitor_->process(te)) {
      diagnostics_ << diagnostics_record(o, cfg_.timing).dump() << '\n';
      if (o.declaration) {
        alerts_ << alert_record(*o.declaration).dump() << '\n';
        alerts_.flush();
        ++declarations_;
        if (!first_report_ && o.report) first_report_ = report_record(*o.report, header.roster);
      }
    }
  }

  std::size_t declarations() const noexcept { return declarations_; }
  const std::optional<OrderedJson>& first_report() const noexcept { return first_report_; }

 private:
  const RunConfig& cfg_;
  std::ostream& alerts_;
  std::ostream& diagnostics_;
  std::optional<Monitor> monitor_;
  std::size_t declarations_ = 0;
  std::optional<OrderedJson> first_report_;
};

}  // namespace detail

/// Result of a detection pass.
struct DetectOutcome {
  std::size_t declarations = 0;
  OrderedJson report;  ///< first cascade's attribution, or the no-cascade record
};

/// Strictly online detection: each turn is processed as soon as the next
/// turn's first line closes it.
inline DetectOutcome detect_stream(std::istream& in, const RunConfig& cfg, std::ostream& alerts,
                                   std::ostream& diagnostics) {
  TraceReader reader;
  detail::DetectSession session(cfg, alerts, diagnostics);
  std::string line;
  while (std::getline(in, line))
    if (auto te = reader.feed(line)) session.turn(reader.header(), *te);
  if (auto te = reader.finish()) session.turn(reader.header(), *te);
  return {session.declarations(), session.first_report().value_or(no_cascade_record())};
}

/// Reads the whole trace first, then runs the same pipeline.
inline DetectOutcome detect_whole(std::istream& in, const RunConfig& cfg, std::ostream& alerts,
                                  std::ostream& diagnostics) {
  const Trace trace = read_trace(in);
  detail::DetectSession session(cfg, alerts, diagnostics);
  for (const auto& te : trace.turns) session.turn(trace.header, te);
  return {session.declarations(), session.first_report().value_or(no_cascade_record())};
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return in;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

// ---- simulate ----------------------------------------------------------------

inline std::string scenario_id(const ScenarioConfig& c) {
  return std::string(to_string(c.attack)) + "_" + to_string(c.topology) + "_" + to_string(c.regime) + "_s" +
         std::to_string(c.seed);
}

/// Writes `<id>.trace.jsonl` and `<id>.truth.json` for every seed of every
/// batch. A seed override replaces each batch's base seed.
inline std::vector<std::string> simulate_to_dir(std::vector<ScenarioBatch> batches,
                                                std::optional<std::uint64_t> seed,
                                                const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (auto& b : batches) {
    if (seed) b.scenario.seed = *seed;
    for (std::size_t k = 0; k < b.count; ++k) {
      ScenarioConfig c = b.scenario;
      c.seed = b.scenario.seed + k;
      const std::string id = scenario_id(c);
      if (!seen.insert(id).second) throw ConfigError("scenario id '" + id + "' is generated twice");
      const SimulatedTrace sim = generate_trace(c);
      write_text(dir / (id + ".trace.jsonl"), trace_text(sim));
      write_text(dir / (id + ".truth.json"), truth_record(sim.truth, sim.header.roster).dump(2) + "\n");
      ids.push_back(id);
    }
  }
  return ids;
}

// ---- eval --------------------------------------------------------------------

namespace detail {

inline std::map<std::string, std::filesystem::path> files_with_suffix(const std::filesystem::path& dir,
                                                                      const std::string& suffix) {
  if (!std::filesystem::is_directory(dir)) throw Error("'" + dir.string() + "' is not a directory");
  std::map<std::string, std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      out[name.substr(0, name.size() - suffix.size())] = entry.path();
  }
  return out;
}

}  // namespace detail

/// Loads matched trace/truth pairs, ordered by id.
inline std::vector<EvalJob> load_corpus(const std::filesystem::path& trace_dir,
                                        const std::filesystem::path& truth_dir) {
  const auto traces = detail::files_with_suffix(trace_dir, ".trace.jsonl");
  const auto truths = detail::files_with_suffix(truth_dir, ".truth.json");
  if (traces.empty()) throw Error("no *.trace.jsonl files in '" + trace_dir.string() + "'");
  std::string unmatched;
  for (const auto& [id, p] : traces)
    if (!truths.count(id)) unmatched += " " + id + " (no truth)";
  for (const auto& [id, p] : truths)
    if (!traces.count(id)) unmatched += " " + id + " (no trace)";
  if (!unmatched.empty()) throw Error("unmatched files:" + unmatched);

  std::vector<EvalJob> jobs;
  for (const auto& [id, path] : traces) {
    EvalJob job;
    job.id = id;
    try {
      auto in = open_input(path.string());
      job.trace = read_trace(in);
      job.truth = parse_truth(read_json_file(truths.at(id).string()), job.trace.header.roster);
    } catch (const Error& e) {
      throw Error(id + ": " + e.what());
    }
    jobs.push_back(std::move(job));
  }
  return jobs;
}

inline OrderedJson eval_dirs(const std::filesystem::path& trace_dir, const std::filesystem::path& truth_dir,
                             const RunConfig& cfg, unsigned threads = 1) {
  const auto jobs = load_corpus(trace_dir, truth_dir);
  if (cfg.verbosity > 0) std::cerr << "eval: " << jobs.size() << " traces\n";
  const auto results = run_all(jobs, cfg.monitor, threads);
  return evaluation_report(results, cfg.eval);
}

}  // namespace casmon

#endif  // CASMON_COMMANDS_HPP

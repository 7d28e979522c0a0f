// casmon: streaming cascade detection and attribution for multi-agent traces.

#include "casmon/commands.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

using namespace casmon;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> k;
  bool timing = false;
};

RunConfig load_config(const Common& c) {
  RunConfig cfg = c.config_path.empty() ? parse_run_config(Json::object()) : parse_run_config(read_json_file(c.config_path));
  if (c.seed) apply_seed(cfg, *c.seed);
  if (c.k) cfg.monitor.spines = *c.k;
  if (c.timing) cfg.timing = true;
  cfg.validate();
  return cfg;
}

/// "-" or empty means the given standard stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) {
    if (path.empty() || path == "-") {
      out_ = &fallback;
      return;
    }
    file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
    if (!*file_) throw Error("cannot write '" + path + "'");
    out_ = file_.get();
  }
  std::ostream& get() { return *out_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* out_ = nullptr;
};

void add_common(CLI::App* app, Common& c, bool with_k) {
  app->add_option("--config", c.config_path, "JSON run configuration");
  app->add_option("--seed", c.seed, "seed for every random choice (overrides the config)");
  if (with_k) app->add_option("--k", c.k, "number of spines to report");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming cascade detection and attribution for multi-agent traces"};
  app.require_subcommand(1);

  Common common;
  std::string trace_path, out_path, diag_path, scenario_path, trace_dir, truth_dir;
  bool whole = false;
  unsigned threads = 1;

  auto* detect = app.add_subcommand("detect", "stream a trace, emit alerts and per-turn diagnostics");
  detect->add_option("trace", trace_path, "trace file ('-' for stdin)")->required();
  add_common(detect, common, true);
  detect->add_option("--out", out_path, "alert stream (default stdout)");
  detect->add_option("--diagnostics", diag_path, "diagnostics stream (default stderr)");
  detect->add_flag("--timing", common.timing, "add per-turn elapsed_ms to diagnostics");
  detect->add_flag("--whole", whole, "read the whole trace before processing");

  auto* attribute = app.add_subcommand("attribute", "write the attribution report of the first cascade");
  attribute->add_option("trace", trace_path, "trace file ('-' for stdin)")->required();
  add_common(attribute, common, true);
  attribute->add_option("--out", out_path, "report file (default stdout)");

  auto* simulate = app.add_subcommand("simulate", "generate labeled synthetic traces");
  simulate->add_option("scenario", scenario_path, "scenario JSON file")->required();
  simulate->add_option("--seed", common.seed, "base seed for every scenario batch");
  simulate->add_option("--out", out_path, "output directory")->required();

  auto* eval = app.add_subcommand("eval", "score a trace corpus against its ground truth");
  eval->add_option("traces", trace_dir, "directory of *.trace.jsonl")->required();
  eval->add_option("truths", truth_dir, "directory of *.truth.json")->required();
  add_common(eval, common, true);
  eval->add_option("--out", out_path, "report file (default stdout)");
  eval->add_option("--threads", threads, "worker threads")->check(CLI::Range(1u, 256u));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitError;
  }

  try {
    if (*detect || *attribute) {
      const RunConfig cfg = load_config(common);
      std::ifstream file;
      std::istream* in = &std::cin;
      if (trace_path != "-") {
        file = open_input(trace_path);
        in = &file;
      }
      if (*detect) {
        Sink alerts(out_path, std::cout);
        Sink diagnostics(diag_path, std::cerr);
        const DetectOutcome r = whole ? detect_whole(*in, cfg, alerts.get(), diagnostics.get())
                                      : detect_stream(*in, cfg, alerts.get(), diagnostics.get());
        return r.declarations > 0 ? kExitCascade : kExitClean;
      }
      std::ostream discard(nullptr);
      const DetectOutcome r = detect_stream(*in, cfg, discard, discard);
      Sink report(out_path, std::cout);
      report.get() << r.report.dump(2) << '\n';
      return r.declarations > 0 ? kExitCascade : kExitClean;
    }
    if (*simulate) {
      const auto ids = simulate_to_dir(parse_scenario_file(read_json_file(scenario_path)), common.seed, out_path);
      std::cerr << "simulate: wrote " << ids.size() << " traces to " << out_path << '\n';
      return kExitClean;
    }
    if (*eval) {
      const RunConfig cfg = load_config(common);
      const OrderedJson report = eval_dirs(trace_dir, truth_dir, cfg, threads);
      Sink out(out_path, std::cout);
      out.get() << report.dump(2) << '\n';
      return kExitClean;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}

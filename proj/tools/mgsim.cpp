#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "mgsim/metrics.hpp"
#include "mgsim/report.hpp"
#include "mgsim/sim.hpp"

namespace fs = std::filesystem;
using namespace mgsim;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 2;
constexpr int kAbort = 3;

struct RunConfig {
  std::string scenario;
  std::string out = "run";
  std::optional<double> dt;
  std::optional<int> decimate;
  std::optional<std::string> graph;
  std::optional<std::string> sweep;
  bool force = false;
};

void apply_overrides(const RunConfig& c, sim::Scenario& s) {
  if (c.dt) {
    // Keep the sample period unless the decimation is given explicitly.
    const double period = s.dt * s.decimate;
    s.dt = *c.dt;
    s.decimate = std::max(1, static_cast<int>(std::lround(period / s.dt)));
  }
  if (c.decimate) {
    s.decimate = *c.decimate;
  }
  if (c.graph) {
    if (*c.graph == "complete") {
      s.secondary.graph = sim::GraphMode::Complete;
    } else if (*c.graph == "sparse") {
      s.secondary.graph = sim::GraphMode::Sparse;
    } else {
      throw DomainError("--graph expects 'sparse' or 'complete'");
    }
  }
}

report::AnalysisOptions parse_sweep(const std::string& spec) {
  report::AnalysisOptions o;
  double lo = 0.0;
  double hi = 0.0;
  int points = 0;
  char c1 = 0;
  char c2 = 0;
  std::istringstream in(spec);
  if (!(in >> lo >> c1 >> hi >> c2 >> points) || c1 != ':' || c2 != ':' || !(in >> std::ws).eof()) {
    throw DomainError("--sweep expects LO:HI:POINTS, got '" + spec + "'");
  }
  if (!(lo > 0.0 && hi > lo && points >= 2)) {
    throw DomainError("--sweep needs 0 < LO < HI and POINTS >= 2");
  }
  o.sweep_lo = lo;
  o.sweep_hi = hi;
  o.sweep_points = points;
  return o;
}

// Creates the output directory; refuses a non-empty one without --force.
void prepare_out(const RunConfig& c) {
  if (fs::exists(c.out)) {
    if (!fs::is_directory(c.out)) {
      throw DomainError("output path '" + c.out + "' is not a directory");
    }
    if (!fs::is_empty(c.out) && !c.force) {
      throw DomainError("output directory '" + c.out + "' is not empty; pass --force to overwrite");
    }
  } else {
    fs::create_directories(c.out);
  }
}

sim::Scenario load(const RunConfig& c) {
  sim::Scenario s = sim::load_scenario(c.scenario);
  apply_overrides(c, s);
  return s;
}

int cmd_simulate(const RunConfig& c) {
  sim::Scenario s;
  try {
    s = load(c);
    if (const auto v = sim::validate_scenario(s); !v.empty()) {
      for (const auto& msg : v) {
        std::cerr << "violation: " << msg << '\n';
      }
      return kInvalid;
    }
    prepare_out(c);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  }
  const sim::TraceLog trace = sim::run_scenario(s);
  for (const auto& w : trace.warnings) {
    std::cerr << "warning: " << w << '\n';
  }
  trace.write_csv(c.out + "/trace.csv");
  std::ofstream(c.out + "/events.json") << trace.events_json().dump(2) << '\n';
  std::ofstream(c.out + "/metrics.json") << metrics::to_json(metrics::compute_metrics(s, trace)).dump(2) << '\n';
  if (trace.aborted) {
    std::cerr << "numerical abort: " << trace.abort_message << " (trace kept up to the last good sample)\n";
    return kAbort;
  }
  std::cout << "wrote " << trace.t.size() << " samples to " << c.out << '\n';
  return kOk;
}

int cmd_analyze(const RunConfig& c) {
  try {
    const sim::Scenario s = load(c);
    const report::AnalysisOptions o = c.sweep ? parse_sweep(*c.sweep) : report::AnalysisOptions{};
    prepare_out(c);
    const auto a = report::analyze(s, o);
    report::write_analysis(a, s, c.out);
    std::cout << "verdict: " << (a.verdict ? "pass" : "fail") << '\n';
    return kOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  }
}

int cmd_validate(const RunConfig& c) {
  std::vector<std::string> v;
  try {
    v = sim::validate_scenario(load(c));
  } catch (const std::exception& e) {
    v.push_back(e.what());
  }
  for (const auto& msg : v) {
    std::cout << "violation: " << msg << '\n';
  }
  std::cout << v.size() << " violations\n";
  return v.empty() ? kOk : kInvalid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DC microgrid L1 adaptive control simulator"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scenario", cfg.scenario, "Scenario JSON file")->required();
    sub->add_option("--dt", cfg.dt, "Integration step override, seconds")->check(CLI::PositiveNumber);
    sub->add_option("--decimate", cfg.decimate, "Samples kept every N steps")->check(CLI::PositiveNumber);
    sub->add_option("--graph", cfg.graph, "Communication graph: sparse or complete");
  };
  auto* simulate = app.add_subcommand("simulate", "Integrate a scenario and write trace, metrics and events");
  add_common(simulate);
  simulate->add_option("--out", cfg.out, "Output directory");
  simulate->add_flag("--force", cfg.force, "Overwrite a non-empty output directory");

  auto* analyze = app.add_subcommand("analyze", "Write stability analysis report and curves");
  add_common(analyze);
  analyze->add_option("--out", cfg.out, "Output directory");
  analyze->add_flag("--force", cfg.force, "Overwrite a non-empty output directory");
  analyze->add_option("--sweep", cfg.sweep, "Filter bandwidth sweep LO:HI:POINTS in rad/s");

  auto* validate = app.add_subcommand("validate", "List every scenario violation");
  add_common(validate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }
  if (simulate->parsed()) {
    return cmd_simulate(cfg);
  }
  if (analyze->parsed()) {
    return cmd_analyze(cfg);
  }
  return cmd_validate(cfg);
}

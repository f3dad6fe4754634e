#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "mgsim/scenario.hpp"
#include "mgsim/stability.hpp"

namespace mgsim::report {

struct AnalysisOptions {
  double sweep_lo = 100.0;  // rad/s
  double sweep_hi = 1e5;
  int sweep_points = 120;
  double bode_lo = 100.0;
  double bode_hi = 1e5;
  int bode_points = 200;
  double locus_lo = -10.0;  // ohm
  double locus_hi = 10.0;
  int locus_points = 201;
};

struct Analysis {
  nlohmann::json summary;  // analysis.json
  bool verdict = false;
  std::vector<double> sweep_grid;
  std::vector<std::vector<double>> sweep_lambda;  // per DGU
  stability::AdmittanceResult admittance;
  std::vector<stability::LocusPoint> locus;
};

// Two-converter system from the first two scenario DGUs and their designs.
stability::TwoConverterSystem two_converter_system(const sim::Scenario& s, const sim::ScenarioDesign& d);

// Load stages behind buck converters for every scenario load.
std::vector<stability::LoadStage> load_stages(const sim::Scenario& s);

std::vector<stability::CouplingBlock> coupling_blocks(const sim::Scenario& s, const sim::ScenarioDesign& d);

Analysis analyze(const sim::Scenario& s, const AnalysisOptions& options = {});

// Writes analysis.json, lambda_sweep.csv, bode.csv and eiglocus.csv into dir.
void write_analysis(const Analysis& a, const sim::Scenario& s, const std::string& dir);

// printf-style %.9g
std::string fmt(double v);

}  // namespace mgsim::report

#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "mgsim/l1ac.hpp"
#include "mgsim/netmodel.hpp"
#include "mgsim/stability.hpp"

namespace mgsim::sim {

struct ControllerConfig {
  std::optional<std::array<Complex, 3>> poles;  // used when gains are absent
  std::optional<RowVec3> gains;
  double gamma = 1e4;
  double omega_c = 3000.0;
  Vec3 q_diag = Vec3::Ones();
  double projection_epsilon = 0.1;
  double omega_z = 100.0;         // sets the default c0
  std::optional<Vec3> c0;
  std::optional<double> nominal_p_cpl;   // W; default is the Kron share of the CPL
  std::optional<double> design_line_g;   // S; default 0 (islanded plant)
  std::optional<std::pair<double, double>> p_cpl_range;  // W; default [0, 2 * nominal]
  std::optional<netmodel::ThetaBox> theta_box;
  Vec3 theta_star = Vec3::Zero();  // matched uncertainty injected into the plant
};

struct DguConfig {
  std::string name;
  netmodel::ConverterSpec spec;
  ControllerConfig controller;
  bool initially_connected = true;
  double islanded_load = 0.0;         // A, drawn while disconnected
  std::optional<double> islanded_v_ref;  // V; default is the bus reference
};

enum class EventKind { PlugIn, PlugOut, LinkFail, LinkAdd, LoadStep, SetpointChange };

std::string to_string(EventKind kind);
EventKind event_kind_from_string(const std::string& s);

struct Event {
  double t = 0.0;
  EventKind kind = EventKind::LoadStep;
  int dgu = -1;                                  // PlugIn, PlugOut
  std::vector<std::pair<int, int>> edges;        // LinkFail, LinkAdd, PlugIn (added links)
  std::string load;                              // LoadStep
  double value = 0.0;                            // LoadStep: W; SetpointChange: V
};

enum class GraphMode { Sparse, Complete };

struct SecondaryConfig {
  bool enabled = true;
  double kp_v = 1.0;
  double ki_v = 5.0;
  double kp_i = 0.5;
  double ki_i = 5.0;
  std::vector<double> m;  // empty means all ones
  GraphMode graph = GraphMode::Sparse;
  std::vector<std::pair<int, int>> edges;  // zero-based DGU indices
};

struct Scenario {
  std::string name = "scenario";
  std::vector<DguConfig> dgus;
  std::vector<netmodel::BusLoad> loads;
  SecondaryConfig secondary;
  std::vector<Event> events;
  double v_bus_ref = 380.0;
  double dt = 1e-5;
  double horizon = 20.0;
  int decimate = 1000;
  // DGU count from which the derivative uses the OpenMP kernel.
  int parallel_min_dgus = 32;

  int size() const { return static_cast<int>(dgus.size()); }
};

Scenario parse_scenario(const nlohmann::json& j);
Scenario load_scenario(const std::string& path);
nlohmann::json scenario_to_json(const Scenario& s);

// Every invariant violation, in a stable order. Empty when valid.
std::vector<std::string> validate_scenario(const Scenario& s);

// Largest natural frequency (rad/s) of the per-DGU design used by the dt guard.
double max_natural_frequency(const Scenario& s);

// Per-DGU controller derived from a scenario.
struct DguDesign {
  netmodel::OperatingPoint op;
  netmodel::AugmentedPlant design_plant;
  l1ac::ControllerGains gains;
  l1ac::FilterSpec filter;
  l1ac::DesiredDynamics dd;
  l1ac::Projection projection;
  double theta_max = 0.0;
  Vec3 theta_star_worst = Vec3::Zero();
  double i_out_nominal = 0.0;   // A at the terminal, full network
  double line_g_design = 0.0;   // S
  double p_cpl_design = 0.0;    // W
  double lambda = 0.0;
};

// Nominal full-network Kron reduction and per-DGU controller designs.
struct ScenarioDesign {
  netmodel::KronResult kron;
  std::vector<DguDesign> dgus;
};

ScenarioDesign design_scenario(const Scenario& s);

// Bus network with every scenario DGU connected, used for the nominal design.
netmodel::BusNetwork full_network(const Scenario& s);

}  // namespace mgsim::sim

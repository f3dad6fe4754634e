#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "mgsim/consensus.hpp"
#include "mgsim/scenario.hpp"

namespace mgsim::sim {

// Global state ordering for the active DGUs: every DGU block
// [x_bar(3), x_hat(3), theta_hat(3), filter(2)] first, then every node block
// [z_v, z_i, pi_v, pi_i]. x_bar holds deviations from the design operating
// point: [inductor current, output voltage, integral of voltage error].
struct StateLayout {
  static constexpr int kDgu = 11;
  static constexpr int kNode = 4;

  std::vector<int> active;  // scenario DGU indices, ascending

  int count() const { return static_cast<int>(active.size()); }
  int dimension() const { return count() * (kDgu + kNode); }
  int dgu_offset(int slot) const { return kDgu * slot; }
  int node_offset(int slot) const { return kDgu * count() + kNode * slot; }
  // Position of a scenario DGU in `active`, or -1.
  int slot_of(int dgu) const;
};

StateLayout assemble_state(const Scenario& s);

// Column names of the full-width layout (every scenario DGU), in layout order.
std::vector<std::string> state_columns(const Scenario& s);
std::vector<std::string> derived_columns(const Scenario& s);

// Per-DGU signals evaluated alongside the derivative.
struct DguSignals {
  double v = 0.0;      // absolute output voltage, V
  double i_t = 0.0;    // absolute inductor current, A
  double i_out = 0.0;  // current delivered to the network, A
  double u = 0.0;      // duty deviation
  double v_ref = 0.0;  // secondary-adjusted voltage reference, V
  double v_hat = 0.0;
  double i_ref_out = 0.0;
  double dv = 0.0;
  double di = 0.0;
};

// Everything the derivative needs for the current active set. Rebuilt by
// events between steps, never inside one.
class SimModel {
 public:
  SimModel(const Scenario& s, const ScenarioDesign& design);

  const Scenario& scenario() const { return *scenario_; }
  const ScenarioDesign& design() const { return *design_; }
  const StateLayout& layout() const { return layout_; }
  const consensus::CommGraph& graph() const { return graph_; }
  double v_bus_ref() const { return v_bus_ref_; }
  int graph_id() const { return graph_id_; }

  // Applies one event, remapping `x` to the new layout.
  void apply(const Event& e, VecX& x);

  // Coupled steady state of the active set with zero secondary corrections.
  VecX initial_state() const;

  VecX derivative_serial(const VecX& x, std::vector<DguSignals>* signals = nullptr) const;
  VecX derivative_parallel(const VecX& x, std::vector<DguSignals>* signals = nullptr) const;

  // Algebraic bus voltage of the bus-connected circuit at the present DGU
  // voltages; diagnostic only.
  double bus_voltage(const std::vector<DguSignals>& signals) const;

 private:
  struct Network {
    MatX g_ij;                  // Kron line conductances between active slots, S
    std::vector<double> share;  // load-current share of each active slot
  };

  struct DguCache {
    Mat3 a_loc = Mat3::Zero();  // local plant without line or CPL damping
    double y_design = 0.0;      // damping admittance folded into the design plant, S
    Vec3 theta_star = Vec3::Zero();
    double gamma = 1.0;
    double m = 1.0;
  };

  void rebuild();
  const DguConfig& dgu(int slot) const;
  const DguDesign& dgu_design(int slot) const;
  // Load current attributed to an active slot at terminal voltage v.
  double load_current(int slot, double v) const;
  Vec3 local_steady_state(int dgu, double w, double y_ref) const;
  template <bool Parallel>
  VecX derivative(const VecX& x, std::vector<DguSignals>* signals) const;

  const Scenario* scenario_;
  const ScenarioDesign* design_;
  StateLayout layout_;
  consensus::CommGraph graph_;
  MatX lap_;  // Laplacian restricted to active slots
  Network net_;
  std::vector<DguCache> cache_;
  std::vector<double> load_power_;
  std::vector<double> m_;
  double v_bus_ref_;
  int graph_id_ = 0;
  int threads_ = 1;
};

struct AppliedEvent {
  double t = 0.0;
  Event event;
  int dimension_after = 0;
  int graph_id_after = 0;
};

struct TraceLog {
  std::vector<std::string> columns;  // excludes the leading time column
  std::vector<double> t;
  std::vector<std::vector<double>> rows;
  std::vector<AppliedEvent> events;
  std::vector<std::string> warnings;
  bool aborted = false;
  std::string abort_message;

  // Index into a row, or -1.
  int column(const std::string& name) const;
  std::vector<double> series(const std::string& name) const;

  void write_csv(const std::string& path) const;
  nlohmann::json events_json() const;
};

struct RunOptions {
  enum class Kernel { Auto, Serial, Parallel };
  Kernel kernel = Kernel::Auto;
};

// Fixed-step RK4 integration of the scenario. A non-finite state ends the
// run with `aborted` set and the samples recorded so far kept.
TraceLog run_scenario(const Scenario& s, const RunOptions& options = {});

// Single-DGU adaptive loop integrated together with its reference system,
// on the design plant plus matched uncertainty theta*.
struct SingleLoopResult {
  std::vector<double> t;
  std::vector<double> x_tilde_norm;
  std::vector<double> lyapunov;
  std::vector<double> ref_error_inf;  // |x_bar - x_ref|_inf
  std::vector<Vec3> x_bar;
  double peak_ref_error = 0.0;
  double peak_x_tilde = 0.0;
};

SingleLoopResult single_dgu_loop(const l1ac::DesiredDynamics& dd, const l1ac::FilterSpec& filter,
                                 const l1ac::Projection& proj, double gamma, const Vec3& theta_star, double y_ref,
                                 double horizon, double dt, int decimate = 1);

}  // namespace mgsim::sim

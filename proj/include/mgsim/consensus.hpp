#pragma once

#include <set>
#include <utility>
#include <vector>

#include "mgsim/linalg.hpp"

namespace mgsim::consensus {

// Undirected communication graph over nodes 0..n-1.
class CommGraph {
 public:
  CommGraph() = default;
  explicit CommGraph(int n);
  // Edges use zero-based node ids. Throws DomainError on self-loops or bad ids.
  CommGraph(int n, const std::vector<std::pair<int, int>>& edges);

  static CommGraph complete(int n);

  int size() const { return n_; }
  const std::set<std::pair<int, int>>& edges() const { return edges_; }
  bool has_edge(int i, int j) const;
  void add_edge(int i, int j);
  bool remove_edge(int i, int j);
  // Appends an isolated node and returns its id.
  int add_node();

  MatX adjacency() const;
  MatX laplacian() const;
  std::vector<std::vector<int>> components() const;
  bool connected() const { return components().size() <= 1; }
  // Second-smallest Laplacian eigenvalue.
  double algebraic_connectivity() const;

 private:
  static std::pair<int, int> key(int i, int j);
  int n_ = 0;
  std::set<std::pair<int, int>> edges_;
};

MatX laplacian(const CommGraph& g);

// Communication graphs of the case study (one-based edges 12 13 24 34 45,
// then 16 and 56 added at plug-in, then 12 and 13 removed).
CommGraph case_graph_initial();
CommGraph case_graph_plugged();
CommGraph case_graph_failed();

struct SecondaryGains {
  std::vector<double> kp_v;
  std::vector<double> ki_v;
  std::vector<double> kp_i;
  std::vector<double> ki_i;
  std::vector<double> m;  // sharing coefficients

  static SecondaryGains uniform(int n, double kp_v, double ki_v, double kp_i, double ki_i);
  void validate(int n) const;
};

// Integrator states per node. Estimates are v_hat = v - z_v and
// i_ref = i_out / m - z_i.
struct SecondaryState {
  VecX z_v;
  VecX z_i;
  VecX pi_v;
  VecX pi_i;

  static SecondaryState zeros(int n);
};

VecX voltage_estimate(const SecondaryState& s, const VecX& v_dc);
VecX current_estimate(const SecondaryState& s, const VecX& i_out, const SecondaryGains& g);

// z' = L * estimate
VecX consensus_rate(const MatX& lap, const VecX& z, const VecX& signal);

// RK4 step of the dynamic-consensus integrator with the input held constant.
SecondaryState consensus_voltage_step(const SecondaryState& s, const VecX& v_dc, const CommGraph& g, double dt);
SecondaryState consensus_current_step(const SecondaryState& s, const VecX& i_out, const SecondaryGains& gains,
                                      const CommGraph& g, double dt);

struct Corrections {
  VecX dv;
  VecX di;
  VecX e_v;  // v_bus_ref - v_hat
  VecX e_i;  // i_ref - i_out / m
};

Corrections pi_corrections(const SecondaryState& s, const SecondaryGains& gains, double v_bus_ref, const VecX& v_dc,
                           const VecX& i_out);

// Advances the PI integrals with the tracking errors held over the step.
SecondaryState pi_step(const SecondaryState& s, const SecondaryGains& gains, double v_bus_ref, const VecX& v_dc,
                       const VecX& i_out, double dt);

VecX compose_reference(double v_bus_ref, const VecX& dv, const VecX& di);

// Resistive network used with identity primaries: node i sits behind R_i on a
// common bus with a resistive load, and its voltage is V_ref_i + d_i.
struct UnitGainPlant {
  std::vector<double> r_line;
  double r_load = 10.0;
  std::vector<double> disturbance;

  static UnitGainPlant uniform(int n, double r_line = 0.1, double r_load = 10.0);
};

struct UnitGainTrace {
  std::vector<double> t;
  std::vector<VecX> v;
  std::vector<VecX> i;
  std::vector<VecX> e_v;
  std::vector<VecX> e_i;
  std::vector<SecondaryState> state;
};

VecX unit_gain_currents(const UnitGainPlant& plant, const VecX& v);

UnitGainTrace unit_gain_closed_loop(const SecondaryGains& gains, const CommGraph& g, double v_bus_ref, double horizon,
                                    const UnitGainPlant& plant, double dt = 1e-3,
                                    const SecondaryState* initial = nullptr);

struct SecondaryLyapunovReport {
  std::vector<double> v_i;  // 0.5 |e_i|^2 per sample
  std::vector<double> v_v;  // 0.5 |e_v|^2 per sample
  bool v_i_to_zero = false;
  bool v_v_to_zero = false;
  bool v_i_eventually_nonincreasing = false;
  bool v_v_eventually_nonincreasing = false;
  double min_laplacian_eig = 0.0;
  double algebraic_connectivity = 0.0;
  bool laplacian_psd = false;
};

SecondaryLyapunovReport secondary_lyapunov_check(const CommGraph& g, const UnitGainTrace& trace,
                                                 double tail_fraction = 0.5, double zero_tol = 1e-6);

}  // namespace mgsim::consensus

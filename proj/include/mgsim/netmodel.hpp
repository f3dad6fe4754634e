#pragma once

// Electrical models of the microgrid: averaged small-signal converter
// matrices, the constant-power-load linearization, bus-voltage algebra and
// the Kron mapping from the bus-connected to the load-connected topology.

#include <map>
#include <span>
#include <string>
#include <vector>

#include "mgsim/linalg.hpp"

namespace mgsim::netmodel {

enum class ConverterKind { Boost, Buck };

std::string to_string(ConverterKind kind);
ConverterKind converter_kind_from_string(const std::string& s);

struct ConverterSpec {
  ConverterKind kind = ConverterKind::Buck;
  double v_in = 0.0;    // V
  double r_t = 0.0;     // filter parasitic resistance, ohm
  double l_t = 0.0;     // H
  double c_t = 0.0;     // F
  double r_line = 0.0;  // line resistance to the bus, ohm

  // Throws DomainError naming the first violated invariant.
  void validate() const;
};

struct OperatingPoint {
  double duty = 0.0;
  double v_dc = 0.0;   // output voltage, V
  double i_dc = 0.0;   // inductor current, A
  double p_cpl = 0.0;  // effective local CPL power, W

  void validate(const ConverterSpec& spec) const;
};

// Duty and inductor current consistent with the converter's steady-state
// relation, given the output voltage and the current delivered at the
// output terminal.
OperatingPoint make_operating_point(const ConverterSpec& spec, double v_dc, double i_out,
                                    double p_cpl = 0.0);

struct DguModel {
  ConverterKind kind = ConverterKind::Buck;
  Mat2 a_ii = Mat2::Zero();
  std::map<int, Mat2> a_ij;  // keyed by neighbour id
  Vec2 b = Vec2::Zero();
  Vec2 e = Vec2::Zero();
  RowVec2 c = RowVec2(0.0, 1.0);
  std::map<int, double> neighbor_line_r;  // R_ij, ohm
};

// R_t/L_t/C_t entries plus line and CPL damping in A_ii(2,2).
DguModel build_dgu_model(const ConverterSpec& spec, const OperatingPoint& op,
                         const std::map<int, double>& neighbor_lines);

struct ThetaBox {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  bool contains(const Vec3& theta, double tol = 0.0) const;
  Vec3 vertex(int index) const;  // index in [0, 8)
  // max over the box of ||theta||_1
  double max_l1() const;
};

struct AugmentedPlant {
  Mat3 a_bar = Mat3::Zero();
  Vec3 b_bar = Vec3::Zero();
  Vec3 f = Vec3(0.0, 0.0, 1.0);
  RowVec3 c_bar = RowVec3(0.0, 1.0, 0.0);
  Vec3 e_bar = Vec3::Zero();  // load-current input, not part of the design model
  ThetaBox theta_set;
};

// Appends the integral-of-error state xi' = y_ref - y.
AugmentedPlant augment_with_integrator(const DguModel& model, const ThetaBox& uncertainty);

// Z_N = -P / I^2. Throws DomainError for zero current.
double cpl_incremental_resistance(double p_load, double i_bus);

enum class LoadKind { ConstantPower, Linear };

struct LoadConverterSpec {
  double v_out = 48.0;          // regulated output voltage, V
  double r_t = 0.01;            // ohm
  double l_t = 1e-3;            // H
  double c_t = 470e-6;          // F
  double pi_bandwidth = 0.0;    // rad/s of the voltage PI; 0 selects the tight preset
  double switching_freq = 3e5;  // rad/s equivalent; tight preset uses 1/10 of it
};

struct BusLoad {
  std::string name;
  LoadKind kind = LoadKind::ConstantPower;
  double power = 0.0;   // W
  double line_r = 0.0;  // ohm
  LoadConverterSpec converter;
};

enum class Topology { BusConnected, LoadConnected };

struct BusNetwork {
  std::vector<ConverterSpec> dgus;
  std::vector<OperatingPoint> ops;
  std::vector<BusLoad> loads;
  Topology topology = Topology::BusConnected;
  double v_nominal = 380.0;  // voltage at which linear loads draw their rated power

  void validate() const;
};

struct KronResult {
  MatX r_ij;                    // n x n, diagonal unused (0)
  std::vector<double> i_load;   // load current seen at each DGU terminal, A
  std::vector<double> i_cpl;    // CPL part of i_load, A
  std::vector<double> p_cpl;    // CPL power share attributed to each DGU, W
  double v_bus = 0.0;
  double i_bus_total = 0.0;
};

// Eliminates the bus node. Loads are current sinks at the bus: constant-power
// loads draw P/v_bus, linear loads draw P/v_nominal.
KronResult kron_reduce(const BusNetwork& net);

// Root of sum(1/R) v^2 - S v - P_total = 0 closest to mean(v_dc), where
// S = sum(v_dc/R) - i_sink. P_total > 0 is net power injected at the bus;
// loads consuming power enter with a negative sign.
double solve_bus_voltage(std::span<const double> v_dc, std::span<const double> r,
                         double p_total, double i_sink = 0.0);

// Residual of the bus-voltage quadratic at v.
double bus_voltage_residual(std::span<const double> v_dc, std::span<const double> r,
                            double p_total, double v, double i_sink = 0.0);

// Closed-form effective CPL rating at DGU `index` given the upper bound of the
// CPL incremental resistance.
double effective_cpl_power(const BusNetwork& net, std::size_t index, double r_cpl_bound);

// Steady-state DGU output currents of the bus-connected circuit solved
// directly by nodal analysis (Newton on the bus KCL). Used as the reference
// for the Kron mapping.
std::vector<double> nodal_dgu_currents(const BusNetwork& net, double* v_bus_out = nullptr);

// Output currents of the reduced load-connected model at the DGU voltages.
std::vector<double> reduced_dgu_currents(const BusNetwork& net, const KronResult& kron);

}  // namespace mgsim::netmodel

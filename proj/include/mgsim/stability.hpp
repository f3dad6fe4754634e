#pragma once

// Offline analysis: L1 norms, the small-gain condition lambda, the adaptation
// bound, performance bounds, the block-Lyapunov global check, the CPL
// input-admittance study and the eigen-locus of the state-feedback loop.

#include <string>
#include <vector>

#include "mgsim/l1ac.hpp"
#include "mgsim/linalg.hpp"
#include "mgsim/netmodel.hpp"

namespace mgsim::stability {

// Scalar transfer function C (sI - A)^{-1} B + D.
struct RationalTf {
  MatX a;
  VecX b;
  RowVecX c;
  double d = 0.0;

  // Controllable canonical realization of num/den (highest power first).
  // Throws DomainError when improper.
  static RationalTf from_poly(const Poly& num, const Poly& den);
  static RationalTf state_space(const MatX& a, const VecX& b, const RowVecX& c, double d = 0.0);

  int order() const { return static_cast<int>(a.rows()); }
  Complex evaluate(Complex s) const;
  std::vector<Complex> poles() const;
  bool is_stable() const;
  // 0 when D != 0, else the index of the first non-zero Markov parameter.
  int relative_degree() const;
};

RationalTf series(const RationalTf& first, const RationalTf& second);  // second * first
RationalTf sum(const RationalTf& g1, const RationalTf& g2);
RationalTf scale(const RationalTf& g, double k);

// |D| + integral of |C e^{At} B| over [0, inf). Throws DomainError when the
// realization is not strictly stable.
double l1_norm(const RationalTf& tf);

RationalTf filter_tf(const l1ac::FilterSpec& filter);

// sum over k of || (C(s) - 1) e_k^T (sI - A_m)^{-1} B || times theta_max.
double lambda_condition(const Mat3& a_m, const Vec3& b_bar, const l1ac::FilterSpec& filter, double theta_max);

struct SweepPoint {
  double omega_c = 0.0;
  double lambda = 0.0;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  bool monotone_decreasing = false;  // reported only
};

SweepResult sweep_filter_bandwidth(const Mat3& a_m, const Vec3& b_bar, double theta_max,
                                   const std::vector<double>& grid);
SweepResult sweep_filter_bandwidth_serial(const Mat3& a_m, const Vec3& b_bar, double theta_max,
                                          const std::vector<double>& grid);

// Log-spaced grid of `points` values from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, int points);

// Parameter ranges bounding the true plant of one DGU.
struct PlantRanges {
  double p_cpl_lo = 0.0;
  double p_cpl_hi = 0.0;
  double line_g_lo = 0.0;  // sum_j 1/R_ij, S
  double line_g_hi = 0.0;
};

struct UncertaintyBound {
  double theta_max = 0.0;
  Vec3 theta_star_worst = Vec3::Zero();
  std::vector<Vec3> vertex_theta;
};

// Augmented plant of a DGU for the given effective CPL power and line
// conductance, without neighbour coupling.
netmodel::AugmentedPlant plant_at(const netmodel::ConverterSpec& spec, const netmodel::OperatingPoint& op,
                                  double p_cpl, double line_g);

// theta* at each vertex of the parameter ranges: the gain correction that
// restores eig(A_m) on the vertex plant. theta_max = 4 max ||theta*||_1^2.
UncertaintyBound uncertainty_bound(const netmodel::ConverterSpec& spec, const netmodel::OperatingPoint& op,
                                   const PlantRanges& ranges, const l1ac::ControllerGains& gains,
                                   const Mat3& a_m);

double theta_max_from_box(const netmodel::ThetaBox& box);

struct PerformanceBounds {
  double rho_0 = 0.0;
  double alpha = 0.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double lambda = 0.0;
  double c_norm = 0.0;   // ||C(s)||_L1
  double h1_norm = 0.0;  // ||H1(s)||_L1
  double state_bound = 0.0;    // gamma1 / sqrt(Gamma)
  double control_bound = 0.0;  // gamma2 / sqrt(Gamma)
};

// H1(s) = C(s) c0^T / (c0^T (sI - A_m)^{-1} B), returned per entry of c0.
std::vector<RationalTf> h1_tf(const l1ac::DesiredDynamics& dd, const l1ac::FilterSpec& filter);

// Bounds evaluated at t = 0. Throws InfeasibleError when lambda >= 1.
PerformanceBounds performance_bounds(double v0, double gamma, const l1ac::DesiredDynamics& dd, double theta_max,
                                     const l1ac::FilterSpec& filter);

struct CouplingBlock {
  int i = 0;
  int j = 0;
  Mat2 a_ij = Mat2::Zero();
};

struct GlobalReport {
  bool pass = false;
  double max_eig = 0.0;  // of sym(A^T P + P A)
  double norm_local = 0.0;     // ||A_m^T P + P A_m||_2 (block-diagonal part)
  double norm_coupling = 0.0;  // ||A_C^T P + P A_C||_2
};

GlobalReport global_stability_check(const std::vector<l1ac::DesiredDynamics>& locals,
                                    const std::vector<CouplingBlock>& coupling, double kappa = 1.0);

// Smallest coupling scale at which the check fails, by bisection on [0, kappa_hi].
// Returns kappa_hi when it still passes there.
double critical_coupling_scale(const std::vector<l1ac::DesiredDynamics>& locals,
                               const std::vector<CouplingBlock>& coupling, double kappa_hi = 1e6);

struct AdmittancePoint {
  double omega = 0.0;
  Complex y_in;
  Complex z_in;
  Complex y_zn_only;  // sum 1/Z_N
  Complex y_zd_only;  // sum 1/Z_D
};

struct AdmittanceResult {
  std::vector<AdmittancePoint> points;
  double crossover = 0.0;  // rad/s; 0 when never within 3 dB
};

struct LoadStage {
  netmodel::LoadConverterSpec spec;
  double power = 0.0;  // W
  double v_in = 380.0;
};

// Loop gain pieces of one load converter.
Complex load_z_n(const LoadStage& load);
Complex load_z_d(const LoadStage& load, double omega);
Complex load_loop_gain(const LoadStage& load, double omega);

// Y_in over the grid plus the lowest frequency from which |Z_in| stays
// within 3 dB of |Z_D| for the rest of the grid.
AdmittanceResult input_admittance(const std::vector<LoadStage>& loads, const std::vector<double>& grid);

struct TwoConverterSystem {
  netmodel::ConverterSpec dgu1;
  netmodel::ConverterSpec dgu2;
  netmodel::OperatingPoint op1;
  netmodel::OperatingPoint op2;
  double r12 = 0.1;
  l1ac::ControllerGains gains1;
  l1ac::ControllerGains gains2;
};

// Two boost converters stepping 100 V up to 382 V with lightly damped
// state-feedback poles.
TwoConverterSystem default_two_converter_system();

// 6x6 closed-loop matrix with a CPL of incremental resistance r_cpl at each
// DGU terminal. r_cpl = 0 contributes no conductance.
MatX two_converter_closed_loop(const TwoConverterSystem& sys, double r_cpl);

struct LocusPoint {
  double r_cpl = 0.0;
  std::vector<Complex> eig;  // sorted by real part, then imaginary part
};

std::vector<LocusPoint> eigen_locus(const TwoConverterSystem& sys, const std::vector<double>& r_grid);
std::vector<LocusPoint> eigen_locus_serial(const TwoConverterSystem& sys, const std::vector<double>& r_grid);

std::vector<double> linear_grid(double lo, double hi, int points);

}  // namespace mgsim::stability

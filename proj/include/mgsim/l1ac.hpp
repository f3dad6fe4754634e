#pragma once

// Decentralised L1 adaptive primary voltage controller of one DGU:
// state feedback plus filtered adaptive compensation, state predictor,
// projection-bounded adaptive law and the LTI reference system.

#include <array>
#include <string>
#include <vector>

#include "mgsim/linalg.hpp"
#include "mgsim/netmodel.hpp"

namespace mgsim::l1ac {

struct ControllerGains {
  RowVec3 k = RowVec3::Zero();  // [K_i, K_v, K_xi]
};

// Second-order Butterworth low-pass C(s) = wc^2 / (s^2 + sqrt(2) wc s + wc^2),
// realized in controllable canonical form with output wc^2 * state(0).
struct FilterSpec {
  double omega_c = 3000.0;

  Poly numerator() const;
  Poly denominator() const;
  Mat2 a() const;
  Vec2 b() const;
  RowVec2 c() const;
  double dc_gain() const;
  static constexpr int relative_degree = 2;
};

Vec2 filter_derivative(const FilterSpec& filter, const Vec2& state, double input);
double filter_output(const FilterSpec& filter, const Vec2& state);

// Smooth projection onto {f(theta) <= 1}, f = (|theta|^2 - bound^2) / (eps bound^2).
struct Projection {
  double bound = 1.0;
  double epsilon = 0.1;

  double convex_function(const Vec3& theta) const;
  Vec3 gradient(const Vec3& theta) const;
  Vec3 apply(const Vec3& theta, const Vec3& y) const;
  // Radius of the inflated set {f <= 1}.
  double outer_radius() const;
};

struct DesiredDynamics {
  Mat3 a_m = Mat3::Zero();
  Vec3 b_m = Vec3::Zero();
  Vec3 f = Vec3(0.0, 0.0, 1.0);
  RowVec3 c_bar = RowVec3(0.0, 1.0, 0.0);
  Mat3 p = Mat3::Identity();
  Mat3 q = Mat3::Identity();
  Vec3 c0 = Vec3::Zero();
};

// A_bar - B_bar K.
Mat3 closed_loop_matrix(const netmodel::AugmentedPlant& plant, const ControllerGains& gains);

// Ackermann pole placement for the augmented plant. Complex poles must come
// in conjugate pairs.
ControllerGains place_poles(const netmodel::AugmentedPlant& plant, const std::array<Complex, 3>& poles);

// Solves A^T P + P A = -Q. Throws DomainError naming the offending eigenvalue
// when A is not Hurwitz.
Mat3 lyapunov_solve(const Mat3& a, const Mat3& q);

// Zeros of c0^T (sI - A)^{-1} b.
std::vector<Complex> transfer_zeros(const Mat3& a, const Vec3& b, const Vec3& c0);

// Default c0 = [1, C_t wz, -C_t wz^2]. Approximately C_t (s^2 + wz s + wz^2) v / s
// at the capacitor, so the channel zeros sit near wz with damping 1/2.
Vec3 default_c0(double c_t, double omega_z = 100.0);

// Builds the predictor's desired dynamics, checking Hurwitz, the Lyapunov
// inequality and minimum phase of (A_m, B_bar, c0). Throws DomainError.
DesiredDynamics make_desired_dynamics(const netmodel::AugmentedPlant& nominal, const ControllerGains& gains,
                                      const Mat3& q, const Vec3& c0);

struct GainParams {
  double r_t = 0.0;
  double l_t = 0.0;
  double c_t = 0.0;
  double duty = 0.0;
  double v_dc = 0.0;
  double i_t = 0.0;                // inductor current at the operating point
  double line_conductance = 0.0;   // sum_j 1/R_ij
  double p_cpl = 0.0;
};

struct GainCondition {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;  // positive when satisfied
  bool satisfied = false;
};

struct GainReport {
  bool ok = false;  // all printed inequalities hold
  std::vector<GainCondition> conditions;
  double trace = 0.0;
  double det = 0.0;
  bool trace_det_ok = false;  // trace(A_m) < 0 and det(A_m) > 0, as printed
  bool routh_hurwitz_ok = false;
  double max_real_eig = 0.0;
  std::string caveat;
};

// Closed-loop desired dynamics built from the operating-point parameters.
Mat3 desired_dynamics_matrix(netmodel::ConverterKind kind, const GainParams& params, const ControllerGains& gains);

GainReport validate_gains(const ControllerGains& gains, netmodel::ConverterKind kind, const GainParams& params);

// Routh-Hurwitz test for a monic cubic s^3 + a2 s^2 + a1 s + a0.
bool routh_hurwitz_cubic(const Poly& monic_cubic);

// u = -(K x_bar + C(p)[theta_hat^T x_bar]); the filter state carries C(p)[.].
double control_law(const ControllerGains& gains, const FilterSpec& filter, const Vec3& x_bar,
                   const Vec2& filter_state);

struct AdaptiveState {
  Vec3 x_hat = Vec3::Zero();
  Vec3 theta_hat = Vec3::Zero();
  Vec2 filter_state = Vec2::Zero();
  double gamma = 1.0;
};

// x_hat' = A_m x_hat + B_m (u_l1 + theta_hat^T x_bar) + F y_ref
Vec3 predictor_derivative(const DesiredDynamics& dd, const Vec3& x_hat, const Vec3& x_bar,
                          const Vec3& theta_hat, double u_l1, double y_ref);

Vec3 predictor_step(const DesiredDynamics& dd, const AdaptiveState& state, const Vec3& x_bar, double u_l1,
                    double y_ref, double dt);

// theta_hat' = Gamma Proj(theta_hat, -x_bar x_tilde^T P B_m), x_tilde = x_hat - x_bar.
Vec3 adaptive_rate(const DesiredDynamics& dd, const Projection& proj, double gamma, const Vec3& theta_hat,
                   const Vec3& x_tilde, const Vec3& x_bar);

Vec3 adaptive_update(const DesiredDynamics& dd, const Projection& proj, const AdaptiveState& state,
                     const Vec3& x_tilde, const Vec3& x_bar, double dt);

// V = x_tilde^T P x_tilde + theta_tilde^T theta_tilde / Gamma
double lyapunov_value(const DesiredDynamics& dd, double gamma, const Vec3& x_tilde, const Vec3& theta_tilde);

// LTI reference system x_ref' = A_m x_ref + B_bar (1 - C(p))[theta*^T x_ref] + F y_ref,
// with the complementary filter state appended: [x_ref(3), filter(2)].
using ReferenceState = Eigen::Matrix<double, 5, 1>;

ReferenceState reference_model_derivative(const DesiredDynamics& dd, const FilterSpec& filter,
                                          const Vec3& theta_star, const ReferenceState& state, double y_ref);

ReferenceState reference_model_step(const DesiredDynamics& dd, const FilterSpec& filter, const Vec3& theta_star,
                                    const ReferenceState& state, double y_ref, double dt);

}  // namespace mgsim::l1ac

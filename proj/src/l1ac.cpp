#include "mgsim/l1ac.hpp"

#include <cmath>
#include <sstream>

#include "mgsim/rk4.hpp"

namespace mgsim::l1ac {

using netmodel::AugmentedPlant;
using netmodel::ConverterKind;

Poly FilterSpec::numerator() const { return {omega_c * omega_c}; }

Poly FilterSpec::denominator() const { return {1.0, std::sqrt(2.0) * omega_c, omega_c * omega_c}; }

Mat2 FilterSpec::a() const {
  Mat2 m;
  m << 0.0, 1.0, -omega_c * omega_c, -std::sqrt(2.0) * omega_c;
  return m;
}

Vec2 FilterSpec::b() const { return {0.0, 1.0}; }

RowVec2 FilterSpec::c() const { return {omega_c * omega_c, 0.0}; }

double FilterSpec::dc_gain() const { return numerator().back() / denominator().back(); }

Vec2 filter_derivative(const FilterSpec& filter, const Vec2& state, double input) {
  const double w = filter.omega_c;
  return {state(1), -w * w * state(0) - std::sqrt(2.0) * w * state(1) + input};
}

double filter_output(const FilterSpec& filter, const Vec2& state) {
  return filter.omega_c * filter.omega_c * state(0);
}

double Projection::convex_function(const Vec3& theta) const {
  const double b2 = bound * bound;
  return (theta.squaredNorm() - b2) / (epsilon * b2);
}

Vec3 Projection::gradient(const Vec3& theta) const { return 2.0 * theta / (epsilon * bound * bound); }

Vec3 Projection::apply(const Vec3& theta, const Vec3& y) const {
  const double f = convex_function(theta);
  const Vec3 g = gradient(theta);
  const double gy = g.dot(y);
  if (f > 0.0 && gy > 0.0) {
    return y - g * (gy * f / g.squaredNorm());
  }
  return y;
}

double Projection::outer_radius() const { return bound * std::sqrt(1.0 + epsilon); }

Mat3 closed_loop_matrix(const AugmentedPlant& plant, const ControllerGains& gains) {
  return plant.a_bar - plant.b_bar * gains.k;
}

namespace {

Poly poly_from_roots(const std::array<Complex, 3>& roots) {
  std::vector<Complex> c{Complex(1.0, 0.0)};
  for (const auto& r : roots) {
    std::vector<Complex> next(c.size() + 1, Complex(0.0, 0.0));
    for (std::size_t i = 0; i < c.size(); ++i) {
      next[i] += c[i];
      next[i + 1] -= c[i] * r;
    }
    c = std::move(next);
  }
  Poly out;
  for (const auto& v : c) {
    if (std::abs(v.imag()) > 1e-6 * (1.0 + std::abs(v.real()))) {
      throw DomainError("pole set is not closed under conjugation");
    }
    out.push_back(v.real());
  }
  return out;
}

std::string describe(Complex z) {
  std::ostringstream os;
  os << z.real() << (z.imag() < 0 ? "-" : "+") << std::abs(z.imag()) << "j";
  return os.str();
}

}  // namespace

ControllerGains place_poles(const AugmentedPlant& plant, const std::array<Complex, 3>& poles) {
  const Mat3& a = plant.a_bar;
  const Vec3& b = plant.b_bar;
  Mat3 wc;
  wc.col(0) = b;
  wc.col(1) = a * b;
  wc.col(2) = a * a * b;
  Eigen::FullPivLU<Mat3> lu(wc);
  if (!lu.isInvertible()) {
    throw DomainError("augmented plant is not controllable");
  }
  const Poly p = poly_from_roots(poles);
  const Mat3 phi = a * a * a + p[1] * a * a + p[2] * a + p[3] * Mat3::Identity();
  ControllerGains g;
  g.k = RowVec3(0.0, 0.0, 1.0) * lu.inverse() * phi;
  return g;
}

Mat3 lyapunov_solve(const Mat3& a, const Mat3& q) {
  for (const auto& ev : eigenvalues(a)) {
    if (ev.real() >= 0.0) {
      throw DomainError("matrix is not Hurwitz: eigenvalue " + describe(ev));
    }
  }
  using Mat9 = Eigen::Matrix<double, 9, 9>;
  const Mat3 id = Mat3::Identity();
  Mat9 k;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      // vec(A^T P) = (I kron A^T) vec(P), vec(P A) = (A^T kron I) vec(P)
      k.block<3, 3>(3 * i, 3 * j) = id(i, j) * a.transpose() + a(j, i) * id;
    }
  }
  const Eigen::Matrix<double, 9, 1> rhs = -Eigen::Map<const Eigen::Matrix<double, 9, 1>>(q.data());
  const Eigen::Matrix<double, 9, 1> sol = k.fullPivLu().solve(rhs);
  const Mat3 p = Eigen::Map<const Mat3>(sol.data());
  return 0.5 * (p + p.transpose());
}

std::vector<Complex> transfer_zeros(const Mat3& a, const Vec3& b, const Vec3& c0) {
  const Poly closed = char_poly(a - b * c0.transpose());
  const Poly open = char_poly(a);
  const Poly diff = poly_add(closed, poly_scale(open, -1.0));
  double scale = 0.0;
  for (double c : diff) {
    scale = std::max(scale, std::abs(c));
  }
  const Poly n = poly_trim(diff, 1e-12 * scale);
  return poly_roots(n);
}

Vec3 default_c0(double c_t, double omega_z) { return {1.0, c_t * omega_z, -c_t * omega_z * omega_z}; }

DesiredDynamics make_desired_dynamics(const AugmentedPlant& nominal, const ControllerGains& gains, const Mat3& q,
                                      const Vec3& c0) {
  DesiredDynamics dd;
  dd.a_m = closed_loop_matrix(nominal, gains);
  dd.b_m = nominal.b_bar;
  dd.f = nominal.f;
  dd.c_bar = nominal.c_bar;
  dd.q = q;
  dd.c0 = c0;
  if (min_eig_sym(q) <= 0.0) {
    throw DomainError("Q is not positive definite");
  }
  dd.p = lyapunov_solve(dd.a_m, q);
  if (min_eig_sym(dd.p) <= 0.0) {
    throw DomainError("Lyapunov solution is not positive definite");
  }
  if (std::abs(c0.dot(dd.b_m)) < 1e-12) {
    throw DomainError("c0^T B_bar vanishes: channel relative degree exceeds one");
  }
  for (const auto& z : transfer_zeros(dd.a_m, dd.b_m, c0)) {
    if (z.real() >= 0.0) {
      throw DomainError("c0 (sI - A_m)^-1 B_bar is non-minimum phase: zero at " + describe(z));
    }
  }
  return dd;
}

Mat3 desired_dynamics_matrix(ConverterKind kind, const GainParams& p, const ControllerGains& gains) {
  const double ki = gains.k(0);
  const double kv = gains.k(1);
  const double kx = gains.k(2);
  const double y = p.line_conductance - p.p_cpl / (p.v_dc * p.v_dc);
  Mat3 m = Mat3::Zero();
  if (kind == ConverterKind::Boost) {
    const double g = 1.0 - p.duty;
    m(0, 0) = -(p.r_t + p.v_dc * ki) / p.l_t;
    m(0, 1) = -(g + p.v_dc * kv) / p.l_t;
    m(0, 2) = -p.v_dc * kx / p.l_t;
    m(1, 0) = (g + p.i_t * ki) / p.c_t;
    m(1, 1) = -(y - p.i_t * kv) / p.c_t;
    m(1, 2) = p.i_t * kx / p.c_t;
  } else {
    m(0, 0) = -(p.r_t + ki) / p.l_t;
    m(0, 1) = -(1.0 + kv) / p.l_t;
    m(0, 2) = -kx / p.l_t;
    m(1, 0) = 1.0 / p.c_t;
    m(1, 1) = -y / p.c_t;
  }
  m(2, 1) = -1.0;
  return m;
}

bool routh_hurwitz_cubic(const Poly& c) {
  if (c.size() != 4 || c[0] == 0.0) {
    return false;
  }
  const double a2 = c[1] / c[0];
  const double a1 = c[2] / c[0];
  const double a0 = c[3] / c[0];
  return a2 > 0.0 && a1 > 0.0 && a0 > 0.0 && a2 * a1 > a0;
}

namespace {

GainCondition less_than(std::string name, double lhs, double rhs) {
  return {std::move(name), lhs, rhs, rhs - lhs, lhs < rhs};
}

}  // namespace

GainReport validate_gains(const ControllerGains& gains, ConverterKind kind, const GainParams& p) {
  GainReport r;
  const double ki = gains.k(0);
  const double kv = gains.k(1);
  const double kx = gains.k(2);
  const double y = p.line_conductance - p.p_cpl / (p.v_dc * p.v_dc);
  if (kind == ConverterKind::Boost) {
    const double g = 1.0 - p.duty;
    r.conditions.push_back(
        less_than("K_i < -(I_t R_t + V_dc (1-D)) / (2 I_t V_dc)", ki, -(p.i_t * p.r_t + p.v_dc * g) / (2.0 * p.i_t * p.v_dc)));
    r.conditions.push_back(less_than("K_v < (Y - (C_t/L_t)(R_t + K_i V_dc)) / I_t", kv,
                                     (y - p.c_t / p.l_t * (p.r_t + ki * p.v_dc)) / p.i_t));
  } else {
    r.conditions.push_back(less_than("K_i < Y / C_t - R_t / L_t", ki, y / p.c_t - p.r_t / p.l_t));
    r.conditions.push_back(less_than("K_v < -(R_t + K_i) Y - 1", kv, -(p.r_t + ki) * y - 1.0));
    r.caveat = "first buck inequality compares a gain with terms of inconsistent units; eigenvalue test is authoritative";
  }
  r.conditions.push_back({"K_xi > 0", kx, 0.0, kx, kx > 0.0});
  r.ok = true;
  for (const auto& c : r.conditions) {
    r.ok = r.ok && c.satisfied;
  }
  const Mat3 m = desired_dynamics_matrix(kind, p, gains);
  r.trace = m.trace();
  r.det = m.determinant();
  r.trace_det_ok = r.trace < 0.0 && r.det > 0.0;
  r.routh_hurwitz_ok = routh_hurwitz_cubic(char_poly(m));
  r.max_real_eig = max_real_eig(m);
  return r;
}

double control_law(const ControllerGains& gains, const FilterSpec& filter, const Vec3& x_bar,
                   const Vec2& filter_state) {
  return -(gains.k.dot(x_bar) + filter_output(filter, filter_state));
}

Vec3 predictor_derivative(const DesiredDynamics& dd, const Vec3& x_hat, const Vec3& x_bar, const Vec3& theta_hat,
                          double u_l1, double y_ref) {
  return dd.a_m * x_hat + dd.b_m * (u_l1 + theta_hat.dot(x_bar)) + dd.f * y_ref;
}

Vec3 predictor_step(const DesiredDynamics& dd, const AdaptiveState& s, const Vec3& x_bar, double u_l1, double y_ref,
                    double dt) {
  auto f = [&](double, const Vec3& xh) { return predictor_derivative(dd, xh, x_bar, s.theta_hat, u_l1, y_ref); };
  return sim::rk4_step(f, s.x_hat, 0.0, dt);
}

Vec3 adaptive_rate(const DesiredDynamics& dd, const Projection& proj, double gamma, const Vec3& theta_hat,
                   const Vec3& x_tilde, const Vec3& x_bar) {
  const double e = x_tilde.dot(dd.p * dd.b_m);
  return gamma * proj.apply(theta_hat, -x_bar * e);
}

Vec3 adaptive_update(const DesiredDynamics& dd, const Projection& proj, const AdaptiveState& s, const Vec3& x_tilde,
                     const Vec3& x_bar, double dt) {
  auto f = [&](double, const Vec3& th) { return adaptive_rate(dd, proj, s.gamma, th, x_tilde, x_bar); };
  return sim::rk4_step(f, s.theta_hat, 0.0, dt);
}

double lyapunov_value(const DesiredDynamics& dd, double gamma, const Vec3& x_tilde, const Vec3& theta_tilde) {
  return x_tilde.dot(dd.p * x_tilde) + theta_tilde.squaredNorm() / gamma;
}

ReferenceState reference_model_derivative(const DesiredDynamics& dd, const FilterSpec& filter,
                                          const Vec3& theta_star, const ReferenceState& state, double y_ref) {
  const Vec3 x = state.head<3>();
  const Vec2 fs = state.tail<2>();
  const double s = theta_star.dot(x);
  const double complementary = s - filter_output(filter, fs);
  ReferenceState d;
  d.head<3>() = dd.a_m * x + dd.b_m * complementary + dd.f * y_ref;
  d.tail<2>() = filter_derivative(filter, fs, s);
  return d;
}

ReferenceState reference_model_step(const DesiredDynamics& dd, const FilterSpec& filter, const Vec3& theta_star,
                                    const ReferenceState& state, double y_ref, double dt) {
  auto f = [&](double, const ReferenceState& x) {
    return reference_model_derivative(dd, filter, theta_star, x, y_ref);
  };
  return sim::rk4_step(f, state, 0.0, dt);
}

}  // namespace mgsim::l1ac

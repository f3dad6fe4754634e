#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "mgsim/l1ac.hpp"
#include "mgsim/stability.hpp"

using namespace mgsim;
using namespace mgsim::l1ac;

namespace {

netmodel::AugmentedPlant buck_plant() {
  const netmodel::ConverterSpec spec{netmodel::ConverterKind::Buck, 500.0, 0.1, 2e-3, 2e-3, 0.1};
  const auto op = netmodel::make_operating_point(spec, 380.0, 10.0);
  return netmodel::augment_with_integrator(netmodel::build_dgu_model(spec, op, {}), {});
}

DesiredDynamics buck_dd() {
  const auto plant = buck_plant();
  const auto g = place_poles(plant, {Complex(-600, 0), Complex(-400, 0), Complex(-200, 0)});
  return make_desired_dynamics(plant, g, Mat3::Identity(), default_c0(2e-3));
}

Mat3 random_hurwitz(std::mt19937& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat3 a;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      a(i, j) = n(rng);
    }
  }
  const double shift = std::max(0.0, max_real_eig(a)) + 0.5;
  return a - shift * Mat3::Identity();
}

}  // namespace

TEST_CASE("pole placement reaches the requested spectrum") {
  const auto plant = buck_plant();
  const auto g = place_poles(plant, {Complex(-300, 300), Complex(-300, -300), Complex(-100, 0)});
  const Poly cp = char_poly(closed_loop_matrix(plant, g));
  // (s^2 + 600 s + 180000)(s + 100)
  const Poly expected = poly_mul({1.0, 600.0, 180000.0}, {1.0, 100.0});
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(cp[k] == doctest::Approx(expected[k]).epsilon(1e-9));
  }
  CHECK_THROWS_AS(place_poles(plant, {Complex(-1, 1), Complex(-2, 0), Complex(-3, 0)}), DomainError);
}

TEST_CASE("lyapunov solve") {
  const Mat3 p1 = lyapunov_solve(-Mat3::Identity(), 2.0 * Mat3::Identity());
  CHECK((p1 - Mat3::Identity()).norm() < 1e-12);
  const Mat3 p2 = lyapunov_solve(Vec3(-1, -2, -3).asDiagonal(), Mat3::Identity());
  CHECK((p2 - Mat3(Vec3(0.5, 0.25, 1.0 / 6.0).asDiagonal())).norm() < 1e-12);
  std::mt19937 rng(3);
  for (int k = 0; k < 50; ++k) {
    const Mat3 a = random_hurwitz(rng);
    const Mat3 p = lyapunov_solve(a, Mat3::Identity());
    CHECK((a.transpose() * p + p * a + Mat3::Identity()).norm() < 1e-9);
  }
  Mat3 bad = -Mat3::Identity();
  bad(2, 2) = 0.5;
  try {
    lyapunov_solve(bad, Mat3::Identity());
    FAIL("expected DomainError");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("0.5") != std::string::npos);
  }
}

TEST_CASE("gain conditions") {
  GainParams p{0.1, 2e-3, 2e-3, 380.0 / 500.0, 380.0, 10.0, 10.0, 0.0};
  ControllerGains g;
  g.k << 1.0, 1.0, 0.0;
  const auto r = validate_gains(g, netmodel::ConverterKind::Buck, p);
  CHECK_FALSE(r.ok);
  CHECK_FALSE(r.conditions.back().satisfied);
  CHECK(r.conditions.back().name == "K_xi > 0");

  SUBCASE("printed inequalities plus Routh imply Hurwitz") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int checked = 0;
    for (int k = 0; k < 4000; ++k) {
      ControllerGains gk;
      gk.k << 20.0 * u(rng), 20.0 * u(rng), 2000.0 * (u(rng) + 1.0);
      const auto rk = validate_gains(gk, netmodel::ConverterKind::Buck, p);
      if (rk.ok && rk.routh_hurwitz_ok) {
        ++checked;
        CHECK(rk.max_real_eig < 0.0);
      }
      CHECK(rk.routh_hurwitz_ok == (rk.max_real_eig < 0.0));
      // det(A_m) = K_xi / (L C): a positive integral gain always leaves a zero
      // with the wrong sign in the characteristic polynomial.
      CHECK(rk.det == doctest::Approx(gk.k(2) / (p.l_t * p.c_t)));
    }
    CHECK(checked == 0);
  }

  SUBCASE("CPL power shrinks the buck feasible region") {
    double prev = std::numeric_limits<double>::infinity();
    for (double pc = 0.0; pc <= 2e6; pc += 1e5) {
      p.p_cpl = pc;
      const double rhs = validate_gains(g, netmodel::ConverterKind::Buck, p).conditions[0].rhs;
      CHECK(rhs < prev);
      prev = rhs;
    }
  }
}

TEST_CASE("minimum-phase check rejects bad c0") {
  const auto plant = buck_plant();
  const auto g = place_poles(plant, {Complex(-600, 0), Complex(-400, 0), Complex(-200, 0)});
  const Vec3 c0 = default_c0(2e-3);
  const auto dd = make_desired_dynamics(plant, g, Mat3::Identity(), c0);
  for (const auto& z : transfer_zeros(dd.a_m, dd.b_m, c0)) {
    CHECK(z.real() < 0.0);
  }
  CHECK_THROWS_AS(make_desired_dynamics(plant, g, Mat3::Identity(), Vec3(1.0, 0.0, 50.0)), DomainError);
}

TEST_CASE("control law") {
  ControllerGains g;
  g.k << 0.1, -0.2, 3.0;
  const FilterSpec f{3000.0};
  const Vec3 x(1.0, 2.0, -1.0);
  CHECK(control_law(g, f, x, Vec2::Zero()) == doctest::Approx(-g.k.dot(x)));
  CHECK(control_law(g, f, Vec3::Zero(), Vec2::Zero()) == 0.0);

  // Step into the filter: second-order Butterworth step response, unit DC gain.
  const double w = f.omega_c;
  const double zeta = 1.0 / std::sqrt(2.0);
  const double wd = w * std::sqrt(1.0 - zeta * zeta);
  const double input = 2.5;
  Vec2 s = Vec2::Zero();
  const double dt = 1e-6;
  double max_err = 0.0;
  for (int k = 1; k <= 20000; ++k) {
    Vec2 k1 = filter_derivative(f, s, input);
    Vec2 k2 = filter_derivative(f, s + 0.5 * dt * k1, input);
    Vec2 k3 = filter_derivative(f, s + 0.5 * dt * k2, input);
    Vec2 k4 = filter_derivative(f, s + dt * k3, input);
    s += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    const double t = k * dt;
    const double y = input * (1.0 - std::exp(-zeta * w * t) * (std::cos(wd * t) + zeta / std::sqrt(1.0 - zeta * zeta) *
                                                                                    std::sin(wd * t)));
    max_err = std::max(max_err, std::abs(filter_output(f, s) - y));
  }
  CHECK(max_err < 1e-9);
  CHECK(std::abs(filter_output(f, s) - input) < 1e-9);
  CHECK(f.dc_gain() == 1.0);
  CHECK(control_law(ControllerGains{}, f, Vec3::Zero(), s) == doctest::Approx(-input).epsilon(1e-9));
}

TEST_CASE("predictor") {
  const auto dd = buck_dd();
  AdaptiveState st;
  CHECK(predictor_derivative(dd, Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), 0.0, 0.0).norm() == 0.0);

  // Reference step: x(t) = A^-1 (e^{At} - I) F y.
  const double y = 2.0;
  const double dt = 1e-5;
  const int steps = 2000;
  for (int k = 0; k < steps; ++k) {
    st.x_hat = predictor_step(dd, st, Vec3::Zero(), 0.0, y, dt);
  }
  const Mat3 at = dd.a_m * (dt * steps);
  const Vec3 exact = dd.a_m.inverse() * ((at.exp() - Mat3::Identity()) * dd.f * y);
  CHECK((st.x_hat - exact).norm() < 1e-8 * exact.norm());

  // Local error of one step against two half steps.
  AdaptiveState s0;
  s0.x_hat = Vec3(0.3, -1.0, 0.01);
  s0.theta_hat = Vec3(0.01, 0.02, -0.5);
  const Vec3 xb(0.1, 0.5, 0.002);
  const double h = 2e-4;
  auto exact_at = [&](double tau) {
    const Vec3 forcing = dd.b_m * (0.1 + s0.theta_hat.dot(xb)) + dd.f * 1.0;
    const Mat3 e = (dd.a_m * tau).exp();
    return Vec3(e * s0.x_hat + dd.a_m.inverse() * (e - Mat3::Identity()) * forcing);
  };
  const Vec3 one = predictor_step(dd, s0, xb, 0.1, 1.0, h);
  AdaptiveState half = s0;
  half.x_hat = predictor_step(dd, s0, xb, 0.1, 1.0, h / 2);
  const Vec3 two = predictor_step(dd, half, xb, 0.1, 1.0, h / 2);
  const double ratio = (one - exact_at(h)).norm() / (two - exact_at(h)).norm();
  CHECK(ratio > 12.0);
  CHECK(ratio < 20.0);
}

TEST_CASE("adaptive law and projection") {
  const auto dd = buck_dd();
  const Projection proj{2.0, 0.1};
  AdaptiveState st;
  st.gamma = 5.0;
  st.theta_hat = Vec3(0.1, -0.2, 0.3);
  CHECK(adaptive_update(dd, proj, st, Vec3::Zero(), Vec3(1, 2, 3), 1e-3) == st.theta_hat);

  const Vec3 xt(1e-3, -2e-3, 1e-4);
  const Vec3 xb(0.5, 1.0, -0.1);
  const double dt = 1e-6;
  const Vec3 euler = st.theta_hat + dt * st.gamma * (-xb * xt.dot(dd.p * dd.b_m));
  const Vec3 step = adaptive_update(dd, proj, st, xt, xb, dt);
  CHECK((step - euler).norm() <= 1e-6 * (euler - st.theta_hat).norm());

  std::mt19937 rng(9);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    Vec3 dir(n(rng), n(rng), n(rng));
    dir.normalize();
    const Vec3 theta = proj.outer_radius() * dir;
    CHECK(proj.convex_function(theta) == doctest::Approx(1.0));
    const Vec3 y(n(rng), n(rng), n(rng));
    CHECK(proj.apply(theta, y).dot(proj.gradient(theta)) <= 1e-12 * y.norm() * proj.gradient(theta).norm());
  }
}

TEST_CASE("reference model") {
  const auto dd = buck_dd();
  const double y = 1.0;
  const double dt = 1e-6;
  ReferenceState a = ReferenceState::Zero();
  ReferenceState b = ReferenceState::Zero();
  Vec3 plain = Vec3::Zero();
  const Vec3 theta(1e-4, 2e-3, -1e-2);
  const FilterSpec fast{1e6};
  const FilterSpec slow{3000.0};
  double peak = 0.0;
  for (int k = 0; k < 50000; ++k) {
    a = reference_model_step(dd, slow, Vec3::Zero(), a, y, dt);
    b = reference_model_step(dd, fast, theta, b, y, dt);
    const Vec3 k1 = dd.a_m * plain + dd.f * y;
    const Vec3 k2 = dd.a_m * (plain + 0.5 * dt * k1) + dd.f * y;
    const Vec3 k3 = dd.a_m * (plain + 0.5 * dt * k2) + dd.f * y;
    const Vec3 k4 = dd.a_m * (plain + dt * k3) + dd.f * y;
    plain += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    peak = std::max(peak, plain.norm());
  }
  CHECK((a.head<3>() - plain).norm() <= 1e-12 * peak);
  CHECK((b.head<3>() - plain).norm() <= 1e-3 * plain.norm());
}

TEST_CASE("reference model stays bounded when lambda < 1") {
  const auto dd = buck_dd();
  const FilterSpec f{3000.0};
  const Vec3 theta(1e-4, -1e-4, 5e-3);
  const double theta_max = 4.0 * std::pow(theta.lpNorm<1>(), 2);
  REQUIRE(stability::lambda_condition(dd.a_m, dd.b_m, f, theta_max) < 1.0);
  ReferenceState s = ReferenceState::Zero();
  const double dt = 1e-5;
  double peak = 0.0;
  for (int k = 0; k < 1000000; ++k) {
    const double y = (k / 100000) % 2 == 0 ? 1.0 : -1.0;
    s = reference_model_step(dd, f, theta, s, y, dt);
    peak = std::max(peak, s.head<3>().lpNorm<Eigen::Infinity>());
  }
  CHECK(std::isfinite(peak));
  CHECK(peak < 10.0 * (dd.a_m.inverse() * dd.f).lpNorm<Eigen::Infinity>());
}

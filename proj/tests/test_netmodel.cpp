#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "mgsim/netmodel.hpp"

using namespace mgsim;
using namespace mgsim::netmodel;

namespace {

ConverterSpec buck_spec() { return {ConverterKind::Buck, 500.0, 0.1, 2e-3, 2e-3, 0.1}; }
ConverterSpec boost_spec() { return {ConverterKind::Boost, 100.0, 0.1, 2e-3, 2e-3, 0.1}; }

// Bus KCL solved by bisection on the stable (high-voltage) branch.
double bisect_bus(const std::vector<double>& v, const std::vector<double>& r, double p_cpl, double i_lin) {
  auto kcl = [&](double vb) {
    double f = -p_cpl / vb - i_lin;
    for (std::size_t k = 0; k < v.size(); ++k) {
      f += (v[k] - vb) / r[k];
    }
    return f;
  };
  double hi = *std::max_element(v.begin(), v.end());
  double lo = 0.5 * hi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (kcl(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("CPL incremental resistance") {
  CHECK(cpl_incremental_resistance(100.0, 10.0) == doctest::Approx(-1.0));
  CHECK(cpl_incremental_resistance(0.0, 5.0) == 0.0);
  CHECK(cpl_incremental_resistance(3800.0, 10.0) == doctest::Approx(-38.0));
  CHECK_THROWS_AS(cpl_incremental_resistance(100.0, 0.0), DomainError);
}

TEST_CASE("buck model without CPL or neighbours") {
  const auto spec = buck_spec();
  const auto op = make_operating_point(spec, 380.0, 10.0);
  const auto m = build_dgu_model(spec, op, {});
  Mat2 expected;
  expected << -spec.r_t / spec.l_t, -1.0 / spec.l_t, 1.0 / spec.c_t, 0.0;
  CHECK((m.a_ii - expected).norm() == doctest::Approx(0.0));
  CHECK(m.b(0) == doctest::Approx(1.0 / spec.l_t));
}

TEST_CASE("boost with zero duty has the buck structure") {
  auto spec = boost_spec();
  spec.v_in = 380.0;
  const auto op = make_operating_point(spec, 380.0, 10.0);
  CHECK(op.duty == 0.0);
  const auto boost = build_dgu_model(spec, op, {});
  auto bspec = spec;
  bspec.kind = ConverterKind::Buck;
  bspec.v_in = 500.0;
  const auto buck = build_dgu_model(bspec, make_operating_point(bspec, 380.0, 10.0), {});
  CHECK((boost.a_ii - buck.a_ii).norm() == doctest::Approx(0.0));
}

TEST_CASE("boost 100 V to 382 V duty") {
  const auto spec = boost_spec();
  const auto op = make_operating_point(spec, 382.0, 10.0);
  CHECK(op.duty == doctest::Approx(1.0 - 100.0 / 382.0).epsilon(1e-12));
  CHECK(op.duty == doctest::Approx(0.7382).epsilon(1e-4));
  const auto m = build_dgu_model(spec, op, {});
  CHECK(m.a_ii(0, 1) == doctest::Approx(-(1.0 - op.duty) / spec.l_t));
  CHECK(m.a_ii(1, 0) == doctest::Approx((1.0 - op.duty) / spec.c_t));
}

TEST_CASE("augmentation structure") {
  const auto spec = buck_spec();
  const auto m = build_dgu_model(spec, make_operating_point(spec, 380.0, 10.0), {{1, 0.5}});
  const auto p = augment_with_integrator(m, {});
  CHECK(p.a_bar(2, 0) == 0.0);
  CHECK(p.a_bar(2, 1) == -1.0);
  CHECK(p.a_bar(2, 2) == 0.0);
  CHECK(p.b_bar(0) == m.b(0));
  CHECK(p.b_bar(1) == m.b(1));
  CHECK(p.b_bar(2) == 0.0);
  // K = 0 closed loop entry by entry
  Mat3 expected = Mat3::Zero();
  expected(0, 0) = -spec.r_t / spec.l_t;
  expected(0, 1) = -1.0 / spec.l_t;
  expected(1, 0) = 1.0 / spec.c_t;
  expected(1, 1) = -(1.0 / 0.5) / spec.c_t;
  expected(2, 1) = -1.0;
  CHECK((p.a_bar - expected).norm() < 1e-9);
}

TEST_CASE("passive open-loop model is stable") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    ConverterSpec s{k % 2 ? ConverterKind::Boost : ConverterKind::Buck, 100.0 + 100.0 * u(rng), 0.5 * u(rng),
                    1e-3 + 4e-3 * u(rng), 1e-3 + 4e-3 * u(rng), 0.05 + u(rng)};
    const double v = s.kind == ConverterKind::Boost ? s.v_in * (1.0 + u(rng)) : s.v_in * (0.2 + 0.7 * u(rng));
    const auto m = build_dgu_model(s, make_operating_point(s, v, 5.0), {});
    CHECK(max_real_eig(m.a_ii) <= 1e-9);
  }
}

TEST_CASE("CPL power reduces damping monotonically") {
  const auto spec = buck_spec();
  std::vector<double> max_re;
  std::vector<double> a22;
  for (double p = 0.0; p <= 400000.0; p += 5000.0) {
    const auto op = make_operating_point(spec, 380.0, 10.0, p);
    const auto m = build_dgu_model(spec, op, {{1, 1.0}});
    a22.push_back(m.a_ii(1, 1));
    max_re.push_back(max_real_eig(m.a_ii));
  }
  for (std::size_t k = 1; k < a22.size(); ++k) {
    CHECK(a22[k] > a22[k - 1]);
    CHECK(max_re[k] >= max_re[k - 1] - 1e-9);
  }
  // Bisection for the destabilising power.
  auto unstable = [&](double p) {
    return max_real_eig(build_dgu_model(spec, make_operating_point(spec, 380.0, 10.0, p), {{1, 1.0}}).a_ii) > 0.0;
  };
  double lo = 0.0;
  double hi = 400000.0;
  REQUIRE(!unstable(lo));
  REQUIRE(unstable(hi));
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (unstable(mid) ? hi : lo) = mid;
  }
  // Trace crosses zero at P/V^2 = 1/R_line + C R_t / L
  const double p_star = 380.0 * 380.0 * (1.0 + spec.c_t * spec.r_t / spec.l_t);
  CHECK(hi == doctest::Approx(p_star).epsilon(1e-6));
}

TEST_CASE("Kron line resistance") {
  BusNetwork net;
  net.dgus = {buck_spec(), buck_spec()};
  net.dgus[0].r_line = 1.0;
  net.dgus[1].r_line = 1.0;
  net.loads = {{"r", LoadKind::Linear, 380.0, 1.0, {}}};
  const auto k = kron_reduce(net);
  // R_1 R_2 (1/R_1 + 1/R_2)
  CHECK(k.r_ij(0, 1) == doctest::Approx(2.0));
  CHECK(k.r_ij(1, 0) == doctest::Approx(2.0));
}

TEST_CASE("Kron symmetry and nodal equivalence on random stars") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int c = 0; c < 100; ++c) {
    BusNetwork net;
    const int n = 2 + c % 5;
    std::vector<double> v;
    std::vector<double> r;
    for (int i = 0; i < n; ++i) {
      auto s = buck_spec();
      s.r_line = 0.05 + 0.45 * u(rng);
      net.dgus.push_back(s);
      net.ops.push_back(make_operating_point(s, 370.0 + 20.0 * u(rng), 1.0));
      v.push_back(net.ops.back().v_dc);
      r.push_back(s.r_line);
    }
    const double p_cpl = 8000.0 * u(rng);
    const double p_lin = 5000.0 * u(rng);
    net.loads = {{"cpl", LoadKind::ConstantPower, p_cpl, 0.1, {}}, {"lin", LoadKind::Linear, p_lin, 0.1, {}}};
    const auto k = kron_reduce(net);
    CHECK((k.r_ij - k.r_ij.transpose()).norm() == 0.0);
    const double vb = bisect_bus(v, r, p_cpl, p_lin / net.v_nominal);
    const auto reduced = reduced_dgu_currents(net, k);
    for (int i = 0; i < n; ++i) {
      const double direct = (v[static_cast<std::size_t>(i)] - vb) / r[static_cast<std::size_t>(i)];
      CHECK(std::abs(reduced[static_cast<std::size_t>(i)] - direct) <= 1e-9 * std::max(1.0, std::abs(direct)));
    }
  }
}

TEST_CASE("bus voltage quadratic") {
  const std::vector<double> v{380.0, 390.0};
  const std::vector<double> r{0.1, 0.3};
  const double weighted = (380.0 / 0.1 + 390.0 / 0.3) / (1.0 / 0.1 + 1.0 / 0.3);
  CHECK(solve_bus_voltage(v, r, 0.0) == doctest::Approx(weighted).epsilon(1e-14));
  const std::vector<double> one{380.0};
  const std::vector<double> r1{1.0};
  CHECK(solve_bus_voltage(one, r1, 0.0) == doctest::Approx(380.0));

  const std::vector<double> six(6, 380.0);
  const std::vector<double> r6(6, 0.1);
  const double vb = solve_bus_voltage(six, r6, -8800.0);
  CHECK(std::abs(bus_voltage_residual(six, r6, -8800.0, vb)) < 1e-9 * vb * vb);
  CHECK(vb < 380.0);
  CHECK_THROWS_AS(solve_bus_voltage(one, r1, -1e6), InfeasibleError);
}

TEST_CASE("effective CPL power") {
  BusNetwork net;
  net.dgus = {buck_spec()};
  net.dgus[0].r_line = 0.2;
  CHECK(effective_cpl_power(net, 0, -20.0) == 0.0);
  net.loads = {{"m", LoadKind::ConstantPower, 3800.0, 0.2, {}}};
  const double r = 0.2;
  const double r_cpl = -20.0;
  CHECK(effective_cpl_power(net, 0, r_cpl) == doctest::Approx(3800.0 * (1.0 + r / r_cpl)).epsilon(1e-12));

  net.dgus = {buck_spec(), buck_spec()};
  net.ops = {make_operating_point(net.dgus[0], 380.0, 1.0), make_operating_point(net.dgus[1], 380.0, 1.0)};
  CHECK(effective_cpl_power(net, 0, r_cpl) == doctest::Approx(effective_cpl_power(net, 1, r_cpl)));
}

TEST_CASE("invalid inputs") {
  auto s = buck_spec();
  s.c_t = 0.0;
  CHECK_THROWS_AS(s.validate(), DomainError);
  auto b = boost_spec();
  CHECK_THROWS_AS(make_operating_point(b, 50.0, 1.0), DomainError);
  CHECK_THROWS_AS(converter_kind_from_string("flyback"), DomainError);
}

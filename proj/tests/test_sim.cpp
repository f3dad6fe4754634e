#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>

#include <unsupported/Eigen/MatrixFunctions>

#include "mgsim/rk4.hpp"
#include "mgsim/sim.hpp"

using namespace mgsim;
using namespace mgsim::sim;

namespace {

std::string scenario_path(const std::string& name) { return std::string(MGSIM_SOURCE_DIR) + "/scenarios/" + name; }

Scenario six_dgu() { return load_scenario(scenario_path("six_dgu_plug_in.json")); }

nlohmann::json buck_json(const std::string& name, double r_line) {
  return {{"name", name},
          {"kind", "buck"},
          {"V_in_volts", 500.0},
          {"R_t_ohms", 0.1},
          {"L_t_henries", 2e-3},
          {"C_t_farads", 2e-3},
          {"R_line_ohms", r_line},
          {"controller", {{"poles_rad_per_s", {{-600, 0}, {-400, 0}, {-200, 0}}}, {"Gamma", 0.1}}}};
}

Scenario two_buck(bool secondary) {
  nlohmann::json j = {{"name", "two_buck"},
                      {"v_bus_ref_volts", 380.0},
                      {"dt_seconds", 1e-5},
                      {"horizon_seconds", 1.0},
                      {"decimate", 100},
                      {"dgus", {buck_json("A", 0.1), buck_json("B", 0.2)}},
                      {"loads", {{{"name", "r"}, {"kind", "linear"}, {"power_watts", 3000.0}}}},
                      {"secondary", {{"enabled", secondary}, {"edges", {{0, 1}}}}},
                      {"events", nlohmann::json::array()}};
  return parse_scenario(j);
}

// Columns holding the integrated state of one trace row.
VecX state_part(const TraceLog& log, std::size_t row, std::size_t width) {
  VecX x(static_cast<Eigen::Index>(width));
  for (std::size_t k = 0; k < width; ++k) {
    x(static_cast<Eigen::Index>(k)) = log.rows[row][k];
  }
  return x;
}

}  // namespace

TEST_CASE("state layout") {
  auto s = two_buck(false);
  s.dgus.resize(1);
  CHECK(assemble_state(s).dimension() == 15);
  const auto six = six_dgu();
  CHECK(assemble_state(six).dimension() == 75);
  CHECK(state_columns(six).size() == 90);
  auto all = six;
  all.dgus[5].initially_connected = true;
  CHECK(assemble_state(all).dimension() == 90);
}

TEST_CASE("RK4 integrator") {
  auto decay = [](double, const Eigen::Matrix<double, 1, 1>& x) { return Eigen::Matrix<double, 1, 1>(-x); };
  const Eigen::Matrix<double, 1, 1> x0(1.0);
  const double x1 = rk4_step(decay, x0, 0.0, 0.1)(0);
  CHECK(x1 == doctest::Approx(0.9048375).epsilon(1e-7));
  CHECK(std::abs(x1 - std::exp(-0.1)) < 1e-7);

  Mat3 a;
  a << -1.0, 2.0, 0.0, -3.0, -1.0, 0.5, 0.0, 0.2, -0.4;
  auto lin = [&](double, const Vec3& x) { return Vec3(a * x); };
  const Vec3 y0(1.0, -0.5, 2.0);
  // One-step error scales with dt^5.
  const double e1 = (rk4_step(lin, y0, 0.0, 0.02) - (a * 0.02).exp() * y0).norm();
  const double e2 = (rk4_step(lin, y0, 0.0, 0.01) - (a * 0.01).exp() * y0).norm();
  CHECK(e1 / e2 == doctest::Approx(32.0).epsilon(0.1));

  auto global = [&](double dt) {
    Vec3 y = y0;
    for (long k = 0; k < std::lround(2.0 / dt); ++k) {
      y = rk4_step(lin, y, 0.0, dt);
    }
    return (y - (a * 2.0).exp() * y0).norm();
  };
  const double ratio = global(0.02) / global(0.01);
  CHECK(ratio > 14.0);
  CHECK(ratio < 18.0);

  auto blow = [](double, const Vec3& x) { return Vec3(x(0), std::nan(""), 0.0); };
  try {
    rk4_step(blow, Vec3(Vec3::Ones()), 0.0, 0.1);
    FAIL("expected NumericalAbort");
  } catch (const NumericalAbort& e) {
    CHECK(std::string(e.what()).find("component 1") != std::string::npos);
  }
}

TEST_CASE("decoupled DGUs settle to their local reference") {
  const auto s = two_buck(false);
  const auto log = run_scenario(s);
  REQUIRE_FALSE(log.aborted);
  for (const char* n : {"A", "B"}) {
    const auto v = log.series(std::string(n) + ".v_dc");
    CHECK(std::abs(v.back() - 380.0) < 1e-6 * 380.0);
    const auto xh = log.series(std::string(n) + ".xhat_v");
    const auto xb = log.series(std::string(n) + ".xbar_v");
    CHECK(std::abs(xh.back() - xb.back()) < 1e-9);
  }
}

TEST_CASE("plug-in keeps surviving states") {
  const auto s = six_dgu();
  const auto d = design_scenario(s);
  SimModel model(s, d);
  VecX x = model.initial_state();
  auto f = [&](double, const VecX& y) { return model.derivative_serial(y); };
  for (int k = 0; k < 2000; ++k) {
    x = rk4_step(f, x, k * s.dt, s.dt);
  }
  const StateLayout before = model.layout();
  const VecX old = x;
  model.apply(s.events.front(), x);
  const StateLayout& after = model.layout();
  CHECK(after.dimension() == before.dimension() + 15);
  for (int a = 0; a < before.count(); ++a) {
    const int b = after.slot_of(before.active[static_cast<std::size_t>(a)]);
    CHECK(x.segment<11>(after.dgu_offset(b)) == old.segment<11>(before.dgu_offset(a)));
    CHECK(x.segment<4>(after.node_offset(b)) == old.segment<4>(before.node_offset(a)));
  }
  const int fresh = after.slot_of(5);
  CHECK(x.segment<3>(after.dgu_offset(fresh)) == x.segment<3>(after.dgu_offset(fresh) + 3));
  CHECK(x.segment<5>(after.dgu_offset(fresh) + 6).norm() == 0.0);
  CHECK(model.graph().has_edge(0, 5));
  CHECK(model.graph().has_edge(4, 5));
}

TEST_CASE("serial and parallel kernels agree bit for bit") {
  auto s = six_dgu();
  s.horizon = 8.3;
  s.decimate = 500;
  const auto serial = run_scenario(s, {RunOptions::Kernel::Serial});
  const auto again = run_scenario(s, {RunOptions::Kernel::Serial});
  setenv("MGSIM_THREADS", "3", 1);
  const auto parallel = run_scenario(s, {RunOptions::Kernel::Parallel});
  unsetenv("MGSIM_THREADS");
  REQUIRE(serial.rows.size() == parallel.rows.size());
  bool same_runs = true;
  bool same_kernels = true;
  for (std::size_t r = 0; r < serial.rows.size(); ++r) {
    for (std::size_t c = 0; c < serial.rows[r].size(); ++c) {
      const double a = serial.rows[r][c];
      const double b = again.rows[r][c];
      const double p = parallel.rows[r][c];
      same_runs = same_runs && (a == b || (std::isnan(a) && std::isnan(b)));
      same_kernels = same_kernels && (a == p || (std::isnan(a) && std::isnan(p)));
    }
  }
  CHECK(same_runs);
  CHECK(same_kernels);
}

TEST_CASE("six-DGU plug-in run") {
  const auto s = six_dgu();
  const auto d = design_scenario(s);
  const auto log = run_scenario(s);
  REQUIRE_FALSE(log.aborted);
  REQUIRE(log.events.size() == 1);
  CHECK(log.events[0].dimension_after == 90);
  CHECK(log.columns.size() == 154);

  // Currents converge to the average load current
  {
    const auto& last = log.rows.back();
    double total = 0.0;
    std::vector<double> i;
    for (const auto& g : s.dgus) {
      i.push_back(last[static_cast<std::size_t>(log.column(g.name + ".i_out"))]);
      total += i.back();
    }
    const double mean = total / static_cast<double>(i.size());
    for (double x : i) {
      CHECK(std::abs(x - mean) < 1e-2 * mean);
    }
    CHECK(std::abs(last[static_cast<std::size_t>(log.column("v_avg"))] - 380.0) < 1e-3 * 380.0);
  }

  // Projection keeps estimates inside the inflated set
  {
    for (std::size_t g = 0; g < s.dgus.size(); ++g) {
      const auto& name = s.dgus[g].name;
      const double radius = d.dgus[g].projection.outer_radius();
      const auto t1 = log.series(name + ".theta_1");
      const auto t2 = log.series(name + ".theta_2");
      const auto t3 = log.series(name + ".theta_3");
      for (std::size_t k = 0; k < t1.size(); ++k) {
        if (!std::isnan(t1[k])) {
          CHECK(Vec3(t1[k], t2[k], t3[k]).norm() <= radius * (1.0 + 1e-9));
        }
      }
    }
  }

  // Collective lyapunov function is non-increasing between events
  {
    std::vector<double> v(log.t.size(), 0.0);
    for (std::size_t g = 0; g < s.dgus.size(); ++g) {
      const auto& name = s.dgus[g].name;
      const auto& dg = d.dgus[g];
      const Vec3 theta_star = s.dgus[g].controller.theta_star;
      for (std::size_t k = 0; k < log.t.size(); ++k) {
        const auto& row = log.rows[k];
        auto at = [&](const std::string& c) { return row[static_cast<std::size_t>(log.column(name + "." + c))]; };
        if (std::isnan(at("xbar_i"))) {
          continue;
        }
        const Vec3 xt(at("xhat_i") - at("xbar_i"), at("xhat_v") - at("xbar_v"), at("xhat_xi") - at("xbar_xi"));
        const Vec3 th(at("theta_1"), at("theta_2"), at("theta_3"));
        v[k] += l1ac::lyapunov_value(dg.dd, s.dgus[g].controller.gamma, xt, th - theta_star);
      }
    }
    const double t_event = log.events[0].t;
    const double per_sample = 1e-6 * s.decimate;
    for (std::size_t k = 1; k < v.size(); ++k) {
      if (log.t[k - 1] < t_event && log.t[k] >= t_event) {
        continue;
      }
      CHECK(v[k] <= v[k - 1] * (1.0 + per_sample) + 1e-15);
    }
  }

  // Halving dt barely moves the terminal state
  {
    auto fine = s;
    fine.dt = s.dt / 2.0;
    fine.decimate = 2 * s.decimate;
    const auto log2 = run_scenario(fine);
    REQUIRE_FALSE(log2.aborted);
    const std::size_t width = state_columns(s).size();
    const VecX a = state_part(log, log.rows.size() - 1, width);
    const VecX b = state_part(log2, log2.rows.size() - 1, width);
    CHECK((a - b).norm() < 1e-6 * a.norm());
  }
}

TEST_CASE("non-finite state aborts and keeps the trace") {
  auto s = two_buck(true);
  s.dgus[0].controller.gamma = 1e14;
  s.dgus[1].controller.gamma = 1e14;
  s.dgus[0].controller.theta_box = netmodel::ThetaBox{Vec3::Constant(-1.0), Vec3::Constant(1.0)};
  s.dgus[0].controller.theta_star = Vec3(0.0, 1e-3, 0.0);
  s.events.push_back({0.1, EventKind::LoadStep, -1, {}, "r", 9000.0});
  const auto log = run_scenario(s);
  CHECK(log.aborted);
  CHECK(!log.t.empty());
  CHECK(log.abort_message.find("non-finite") != std::string::npos);
}

TEST_CASE("scenario round trip and events echo") {
  const auto s = load_scenario(scenario_path("link_failure.json"));
  const auto j = scenario_to_json(s);
  CHECK(scenario_to_json(parse_scenario(j)) == j);
  CHECK(validate_scenario(s).empty());
  CHECK_THROWS_AS(load_scenario(scenario_path("missing.json")), std::exception);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "mgsim/metrics.hpp"

using namespace mgsim;
using namespace mgsim::metrics;

namespace {

std::vector<double> time_grid(double horizon, double dt) {
  std::vector<double> t;
  for (long k = 0; k <= std::lround(horizon / dt); ++k) {
    t.push_back(static_cast<double>(k) * dt);
  }
  return t;
}

// Underdamped unit step of a standard second-order system.
double second_order_step(double t, double zeta, double wn) {
  const double wd = wn * std::sqrt(1.0 - zeta * zeta);
  const double phi = std::acos(zeta);
  return 1.0 - std::exp(-zeta * wn * t) * std::sin(wd * t + phi) / std::sqrt(1.0 - zeta * zeta);
}

nlohmann::json dgu_json(const std::string& name) {
  return {{"name", name},
          {"kind", "buck"},
          {"V_in_volts", 500.0},
          {"R_t_ohms", 0.1},
          {"L_t_henries", 2e-3},
          {"C_t_farads", 2e-3},
          {"R_line_ohms", 0.1},
          {"controller", {{"poles_rad_per_s", {{-600, 0}, {-400, 0}, {-200, 0}}}, {"Gamma", 0.1}}}};
}

sim::Scenario pair_scenario() {
  nlohmann::json j = {{"name", "pair"},
                      {"v_bus_ref_volts", 380.0},
                      {"dt_seconds", 1e-5},
                      {"horizon_seconds", 2.0},
                      {"decimate", 100},
                      {"dgus", {dgu_json("A"), dgu_json("B")}},
                      {"loads", {{{"name", "r"}, {"kind", "linear"}, {"power_watts", 3000.0}}}},
                      {"secondary", {{"enabled", true}, {"edges", {{0, 1}}}}},
                      {"events", nlohmann::json::array()}};
  return sim::parse_scenario(j);
}

}  // namespace

TEST_CASE("overshoot") {
  const auto t = time_grid(5.0, 1e-3);
  std::vector<double> lag;
  std::vector<double> ring;
  for (double s : t) {
    lag.push_back(1.0 - std::exp(-s / 0.1));
    ring.push_back(second_order_step(s, 0.2, 10.0));
  }
  CHECK(*overshoot_pct(lag, 0.0) == 0.0);

  const double zeta = 0.2;
  const double expected = 100.0 * std::exp(-zeta * M_PI / std::sqrt(1.0 - zeta * zeta));
  CHECK(*overshoot_pct(ring, 0.0) == doctest::Approx(expected).epsilon(1e-4));

  // Downward steps are measured the same way.
  std::vector<double> down;
  for (double y : ring) {
    down.push_back(10.0 - 2.0 * y);
  }
  CHECK(*overshoot_pct(down, 10.0) == doctest::Approx(expected).epsilon(1e-4));

  CHECK(*overshoot_pct(std::vector<double>(20, 3.0), 3.0) == 0.0);
  CHECK_FALSE(overshoot_pct({0.0, 1.0, 1.0}, 0.0).has_value());
}

TEST_CASE("settling time") {
  const double dt = 1e-3;
  const auto t = time_grid(5.0, dt);
  std::vector<double> lag;
  for (double s : t) {
    lag.push_back(1.0 - std::exp(-s / 0.1));
  }
  const double ts = *settling_time(t, lag);
  const double exact = 0.1 * std::log(50.0);
  CHECK(ts >= exact - 1e-9);
  CHECK(ts <= exact + dt);

  CHECK(*settling_time(t, std::vector<double>(t.size(), 380.0)) == 0.0);

  const std::vector<double> short_t{0.0, 0.1, 0.2};
  CHECK_FALSE(settling_time(short_t, {1.0, 2.0, 3.0}).has_value());

  // Still moving at the end of the window.
  std::vector<double> ramp;
  for (double s : t) {
    ramp.push_back(1.0 + s);
  }
  CHECK_FALSE(settling_time(t, ramp).has_value());
}

TEST_CASE("windowed scenario metrics") {
  const auto s = pair_scenario();
  sim::TraceLog log;
  log.columns = {"A.i_out", "B.i_out", "v_avg"};
  const auto t = time_grid(2.0, 1e-3);
  for (double x : t) {
    const double after = x >= 1.0 ? 1.0 - std::exp(-(x - 1.0) / 0.05) : 0.0;
    log.t.push_back(x);
    log.rows.push_back({10.0 + 2.0 * after, 10.0 + 3.0 * after, 380.0 + 0.38 * after});
  }
  sim::Event step{1.0, sim::EventKind::LoadStep, -1, {}, "r", 6000.0};
  log.events.push_back({1.0, step, 30, 0});

  const auto m = compute_metrics(s, log);
  REQUIRE(m.windows.size() == 2);
  CHECK(m.windows[0].trigger == "initial");
  CHECK(m.windows[1].trigger == "load_step");
  CHECK(m.windows[1].t_start == doctest::Approx(1.0));

  CHECK(*m.windows[0].sharing_err_pct == doctest::Approx(0.0));
  CHECK(*m.windows[0].avg_voltage_err_pct == doctest::Approx(0.0));
  CHECK(*m.windows[0].settling_time == 0.0);
  CHECK_FALSE(m.windows[0].overshoot_pct.has_value());

  // Final currents 12 and 13 against a mean of 12.5.
  CHECK(*m.current_sharing_err == doctest::Approx(100.0 * 0.5 / 12.5).epsilon(1e-6));
  CHECK(*m.steady_state_avg_voltage_err == doctest::Approx(0.1).epsilon(1e-6));
  // Monotone response: only the residual tail of the final-window mean shows up.
  CHECK(*m.overshoot_pct < 1e-5);
  CHECK(*m.settling_time_2pct >= 0.05 * std::log(3.0 / (0.02 * 13.0)) - 1e-9);
  CHECK(*m.settling_time_2pct <= 0.05 * std::log(3.0 / (0.02 * 13.0)) + 1e-3);

  const auto j = to_json(m);
  CHECK(j["windows"].size() == 2);
  CHECK(j["windows"][0]["overshoot_pct"] == "unavailable");
  CHECK(j["current_sharing_err_pct"].get<double>() == doctest::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("non-finite channels are skipped") {
  const auto s = pair_scenario();
  sim::TraceLog log;
  log.columns = {"A.i_out", "B.i_out", "v_avg"};
  for (int k = 0; k < 50; ++k) {
    log.t.push_back(k * 1e-2);
    log.rows.push_back({5.0, std::nan(""), 380.0});
  }
  const auto m = compute_metrics(s, log);
  REQUIRE(m.windows.size() == 1);
  CHECK(*m.current_sharing_err == 0.0);
  CHECK(*m.windows[0].mean_current == 5.0);
}

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "mgsim/sim.hpp"

namespace mgsim::metrics {

// Time from the window start until the signal stays within +-band of its
// final-window mean for good. nullopt when the window holds too few samples.
std::optional<double> settling_time(const std::vector<double>& t, const std::vector<double>& y, double band = 0.02,
                                    double final_fraction = 0.1);

// Peak excursion beyond the final value relative to the step size, in %.
// Zero when the response never passes the final value.
std::optional<double> overshoot_pct(const std::vector<double>& y, double pre, double final_fraction = 0.1);

struct WindowMetrics {
  double t_start = 0.0;
  double t_end = 0.0;
  std::string trigger;  // event kind, or "initial"
  std::optional<double> settling_time;
  std::optional<double> overshoot_pct;
  std::optional<double> avg_voltage_err_pct;
  std::optional<double> sharing_err_pct;
  std::optional<double> mean_current;  // mean of i_out / m across active DGUs
};

struct Metrics {
  std::vector<WindowMetrics> windows;
  // Copied from the last window.
  std::optional<double> settling_time_2pct;
  std::optional<double> overshoot_pct;
  std::optional<double> steady_state_avg_voltage_err;
  std::optional<double> current_sharing_err;
};

// Windows are split at each applied event; sharing uses i_out / m_i.
Metrics compute_metrics(const sim::Scenario& s, const sim::TraceLog& trace);

nlohmann::json to_json(const Metrics& m);

}  // namespace mgsim::metrics

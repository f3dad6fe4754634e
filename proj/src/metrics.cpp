#include "mgsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mgsim::metrics {

namespace {

constexpr std::size_t kMinWindowSamples = 10;

std::size_t final_start(std::size_t n, double final_fraction) {
  const auto len = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(final_fraction * static_cast<double>(n))));
  return n > len ? n - len : 0;
}

double final_mean(const std::vector<double>& y, double final_fraction) {
  const std::size_t k0 = final_start(y.size(), final_fraction);
  return std::accumulate(y.begin() + static_cast<std::ptrdiff_t>(k0), y.end(), 0.0) /
         static_cast<double>(y.size() - k0);
}

bool all_finite(const std::vector<double>& y) {
  return std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); });
}

template <typename T>
void keep_max(std::optional<T>& acc, const std::optional<T>& v) {
  if (v && (!acc || *v > *acc)) {
    acc = v;
  }
}

}  // namespace

std::optional<double> settling_time(const std::vector<double>& t, const std::vector<double>& y, double band,
                                    double final_fraction) {
  if (y.size() < kMinWindowSamples || t.size() != y.size()) {
    return std::nullopt;
  }
  const double f = final_mean(y, final_fraction);
  const double tol = band * std::abs(f);
  for (std::size_t k = y.size(); k-- > 0;) {
    if (std::abs(y[k] - f) > tol) {
      if (k + 1 >= y.size()) {
        return std::nullopt;  // never settles inside the window
      }
      return t[k + 1] - t.front();
    }
  }
  return 0.0;
}

std::optional<double> overshoot_pct(const std::vector<double>& y, double pre, double final_fraction) {
  if (y.size() < kMinWindowSamples) {
    return std::nullopt;
  }
  const double f = final_mean(y, final_fraction);
  const double step = f - pre;
  if (step == 0.0) {
    return 0.0;
  }
  const double dir = step > 0.0 ? 1.0 : -1.0;
  double peak = 0.0;
  for (double v : y) {
    peak = std::max(peak, dir * (v - f));
  }
  return 100.0 * peak / std::abs(step);
}

Metrics compute_metrics(const sim::Scenario& s, const sim::TraceLog& trace) {
  Metrics out;
  const std::size_t n = trace.t.size();
  if (n == 0) {
    return out;
  }
  std::vector<std::size_t> cuts{0};
  std::vector<std::string> triggers{"initial"};
  std::vector<double> v_ref{s.v_bus_ref};
  double ref = s.v_bus_ref;
  for (const auto& e : trace.events) {
    const auto k = static_cast<std::size_t>(std::lower_bound(trace.t.begin(), trace.t.end(), e.t - 1e-12) -
                                            trace.t.begin());
    if (e.event.kind == sim::EventKind::SetpointChange) {
      ref = e.event.value;
    }
    if (k >= n) {
      continue;
    }
    if (k == cuts.back()) {
      triggers.back() = sim::to_string(e.event.kind);
      v_ref.back() = ref;
    } else {
      cuts.push_back(k);
      triggers.push_back(sim::to_string(e.event.kind));
      v_ref.push_back(ref);
    }
  }
  cuts.push_back(n);

  const int v_avg_col = trace.column("v_avg");
  for (std::size_t w = 0; w + 1 < cuts.size(); ++w) {
    const std::size_t k0 = cuts[w];
    const std::size_t k1 = cuts[w + 1];
    WindowMetrics wm;
    wm.t_start = trace.t[k0];
    wm.t_end = trace.t[k1 - 1];
    wm.trigger = triggers[w];
    if (k1 - k0 >= kMinWindowSamples) {
      const std::vector<double> t(trace.t.begin() + static_cast<std::ptrdiff_t>(k0),
                                  trace.t.begin() + static_cast<std::ptrdiff_t>(k1));
      std::vector<double> finals;
      for (int d = 0; d < s.size(); ++d) {
        const auto& cfg = s.dgus[static_cast<std::size_t>(d)];
        const double m = s.secondary.m.empty() ? 1.0 : s.secondary.m[static_cast<std::size_t>(d)];
        const int col = trace.column(cfg.name + ".i_out");
        std::vector<double> y;
        for (std::size_t k = k0; k < k1; ++k) {
          y.push_back(trace.rows[k][static_cast<std::size_t>(col)]);
        }
        if (!all_finite(y)) {
          continue;
        }
        keep_max(wm.settling_time, settling_time(t, y));
        const double f = final_mean(y, 0.1);
        const double pre = k0 > 0 ? trace.rows[k0 - 1][static_cast<std::size_t>(col)] : y.front();
        if (std::isfinite(pre) && std::abs(f - pre) > 0.01 * std::abs(f)) {
          keep_max(wm.overshoot_pct, overshoot_pct(y, pre));
        }
        finals.push_back(f / m);
      }
      if (!finals.empty()) {
        const double mean = std::accumulate(finals.begin(), finals.end(), 0.0) / static_cast<double>(finals.size());
        double worst = 0.0;
        for (double f : finals) {
          worst = std::max(worst, std::abs(f - mean));
        }
        wm.mean_current = mean;
        wm.sharing_err_pct = 100.0 * worst / std::abs(mean);
      }
      std::vector<double> v;
      for (std::size_t k = k0; k < k1; ++k) {
        v.push_back(trace.rows[k][static_cast<std::size_t>(v_avg_col)]);
      }
      wm.avg_voltage_err_pct = 100.0 * std::abs(final_mean(v, 0.1) - v_ref[w]) / v_ref[w];
    }
    out.windows.push_back(wm);
  }
  const auto& last = out.windows.back();
  out.settling_time_2pct = last.settling_time;
  out.overshoot_pct = last.overshoot_pct;
  out.steady_state_avg_voltage_err = last.avg_voltage_err_pct;
  out.current_sharing_err = last.sharing_err_pct;
  return out;
}

namespace {

nlohmann::json opt(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json("unavailable");
}

}  // namespace

nlohmann::json to_json(const Metrics& m) {
  nlohmann::json windows = nlohmann::json::array();
  for (const auto& w : m.windows) {
    windows.push_back({{"t_start_seconds", w.t_start},
                       {"t_end_seconds", w.t_end},
                       {"trigger", w.trigger},
                       {"settling_time_2pct_seconds", opt(w.settling_time)},
                       {"overshoot_pct", opt(w.overshoot_pct)},
                       {"steady_state_avg_voltage_err_pct", opt(w.avg_voltage_err_pct)},
                       {"current_sharing_err_pct", opt(w.sharing_err_pct)},
                       {"mean_current_amps", opt(w.mean_current)}});
  }
  return {{"settling_time_2pct_seconds", opt(m.settling_time_2pct)},
          {"overshoot_pct", opt(m.overshoot_pct)},
          {"steady_state_avg_voltage_err_pct", opt(m.steady_state_avg_voltage_err)},
          {"current_sharing_err_pct", opt(m.current_sharing_err)},
          {"windows", windows}};
}

}  // namespace mgsim::metrics

#include "mgsim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>

#include "mgsim/parallel.hpp"
#include "mgsim/rk4.hpp"

namespace mgsim::sim {

using nlohmann::json;

int StateLayout::slot_of(int dgu) const {
  const auto it = std::lower_bound(active.begin(), active.end(), dgu);
  return (it != active.end() && *it == dgu) ? static_cast<int>(it - active.begin()) : -1;
}

StateLayout assemble_state(const Scenario& s) {
  StateLayout l;
  for (int i = 0; i < s.size(); ++i) {
    if (s.dgus[static_cast<std::size_t>(i)].initially_connected) {
      l.active.push_back(i);
    }
  }
  return l;
}

std::vector<std::string> state_columns(const Scenario& s) {
  static const char* dgu_fields[] = {"xbar_i", "xbar_v", "xbar_xi", "xhat_i",  "xhat_v", "xhat_xi",
                                     "theta_1", "theta_2", "theta_3", "filter_1", "filter_2"};
  static const char* node_fields[] = {"z_v", "z_i", "pi_v", "pi_i"};
  std::vector<std::string> out;
  for (const auto& d : s.dgus) {
    for (const char* f : dgu_fields) {
      out.push_back(d.name + "." + f);
    }
  }
  for (const auto& d : s.dgus) {
    for (const char* f : node_fields) {
      out.push_back(d.name + "." + f);
    }
  }
  return out;
}

std::vector<std::string> derived_columns(const Scenario& s) {
  static const char* fields[] = {"v_dc", "i_dc", "i_out", "u", "xi", "v_ref", "v_hat_bus", "i_ref_out", "dv", "di"};
  std::vector<std::string> out;
  for (const auto& d : s.dgus) {
    for (const char* f : fields) {
      out.push_back(d.name + "." + f);
    }
  }
  out.insert(out.end(), {"v_avg", "v_bus", "graph_id", "n_active"});
  return out;
}

SimModel::SimModel(const Scenario& s, const ScenarioDesign& design)
    : scenario_(&s), design_(&design), layout_(assemble_state(s)), v_bus_ref_(s.v_bus_ref) {
  const int n = s.size();
  if (s.secondary.graph == GraphMode::Complete) {
    graph_ = consensus::CommGraph::complete(n);
  } else {
    graph_ = consensus::CommGraph(n, s.secondary.edges);
  }
  for (const auto& l : s.loads) {
    load_power_.push_back(l.power);
  }
  m_ = s.secondary.m.empty() ? std::vector<double>(static_cast<std::size_t>(n), 1.0) : s.secondary.m;
  threads_ = thread_count();
  rebuild();
}

void SimModel::rebuild() {
  const int n = layout_.count();
  lap_ = MatX::Zero(n, n);
  const MatX full = graph_.laplacian();
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      lap_(a, b) = full(layout_.active[static_cast<std::size_t>(a)], layout_.active[static_cast<std::size_t>(b)]);
    }
  }
  // Off-diagonal entries of the full Laplacian may reference inactive nodes;
  // restore the zero row sums over the active set.
  for (int a = 0; a < n; ++a) {
    lap_(a, a) = 0.0;
    lap_(a, a) = -lap_.row(a).sum();
  }

  std::vector<double> y(static_cast<std::size_t>(n));
  double g_total = 0.0;
  for (int a = 0; a < n; ++a) {
    y[static_cast<std::size_t>(a)] = 1.0 / dgu(a).spec.r_line;
    g_total += y[static_cast<std::size_t>(a)];
  }
  net_.g_ij = MatX::Zero(n, n);
  net_.share.assign(static_cast<std::size_t>(n), 0.0);
  for (int a = 0; a < n; ++a) {
    net_.share[static_cast<std::size_t>(a)] = y[static_cast<std::size_t>(a)] / g_total;
    for (int b = 0; b < n; ++b) {
      if (a != b) {
        net_.g_ij(a, b) = y[static_cast<std::size_t>(a)] * y[static_cast<std::size_t>(b)] / g_total;
      }
    }
  }

  cache_.clear();
  for (int a = 0; a < n; ++a) {
    const int d = layout_.active[static_cast<std::size_t>(a)];
    const DguDesign& dd = design_->dgus[static_cast<std::size_t>(d)];
    DguCache c;
    c.a_loc = dd.design_plant.a_bar;
    c.a_loc(1, 1) = 0.0;
    c.y_design = -dd.design_plant.a_bar(1, 1) * scenario_->dgus[static_cast<std::size_t>(d)].spec.c_t;
    c.theta_star = scenario_->dgus[static_cast<std::size_t>(d)].controller.theta_star;
    c.gamma = scenario_->dgus[static_cast<std::size_t>(d)].controller.gamma;
    c.m = m_[static_cast<std::size_t>(d)];
    cache_.push_back(c);
  }
}

const DguConfig& SimModel::dgu(int slot) const {
  return scenario_->dgus[static_cast<std::size_t>(layout_.active[static_cast<std::size_t>(slot)])];
}

const DguDesign& SimModel::dgu_design(int slot) const {
  return design_->dgus[static_cast<std::size_t>(layout_.active[static_cast<std::size_t>(slot)])];
}

Vec3 SimModel::local_steady_state(int dgu, double w, double y_ref) const {
  const DguDesign& dd = design_->dgus[static_cast<std::size_t>(dgu)];
  const auto& cfg = scenario_->dgus[static_cast<std::size_t>(dgu)];
  Mat3 a = dd.design_plant.a_bar;
  a(1, 1) = 0.0;
  const Vec3& b = dd.design_plant.b_bar;
  a += b * (cfg.controller.theta_star.transpose() - dd.gains.k);
  const Vec3 rhs = dd.design_plant.e_bar * w + dd.design_plant.f * y_ref;
  return a.fullPivLu().solve(-rhs);
}

double SimModel::load_current(int slot, double v) const {
  double lin = 0.0;
  double cpl = 0.0;
  const auto& loads = scenario_->loads;
  for (std::size_t k = 0; k < loads.size(); ++k) {
    if (loads[k].kind == netmodel::LoadKind::Linear) {
      lin += load_power_[k];
    } else {
      cpl += load_power_[k];
    }
  }
  const double v_nom = scenario_->v_bus_ref;
  return net_.share[static_cast<std::size_t>(slot)] * (lin * v / (v_nom * v_nom) + cpl / v);
}

VecX SimModel::initial_state() const {
  const int n = layout_.count();
  VecX x = VecX::Zero(layout_.dimension());
  for (int a = 0; a < n; ++a) {
    const DguDesign& dd = dgu_design(a);
    const double w = load_current(a, dd.op.v_dc) - dd.i_out_nominal;
    const Vec3 xb = local_steady_state(layout_.active[static_cast<std::size_t>(a)], w, v_bus_ref_ - dd.op.v_dc);
    x.segment<3>(layout_.dgu_offset(a)) = xb;
    x.segment<3>(layout_.dgu_offset(a) + 3) = xb;
  }
  return x;
}

void SimModel::apply(const Event& e, VecX& x) {
  switch (e.kind) {
    case EventKind::PlugIn: {
      StateLayout next = layout_;
      next.active.insert(std::upper_bound(next.active.begin(), next.active.end(), e.dgu), e.dgu);
      VecX y = VecX::Zero(next.dimension());
      for (int a = 0; a < layout_.count(); ++a) {
        const int b = next.slot_of(layout_.active[static_cast<std::size_t>(a)]);
        y.segment<StateLayout::kDgu>(next.dgu_offset(b)) = x.segment<StateLayout::kDgu>(layout_.dgu_offset(a));
        y.segment<StateLayout::kNode>(next.node_offset(b)) = x.segment<StateLayout::kNode>(layout_.node_offset(a));
      }
      const auto& cfg = scenario_->dgus[static_cast<std::size_t>(e.dgu)];
      const DguDesign& dd = design_->dgus[static_cast<std::size_t>(e.dgu)];
      const double v_island = cfg.islanded_v_ref.value_or(v_bus_ref_);
      const Vec3 xb = local_steady_state(e.dgu, cfg.islanded_load - dd.i_out_nominal, v_island - dd.op.v_dc);
      const int slot = next.slot_of(e.dgu);
      y.segment<3>(next.dgu_offset(slot)) = xb;
      y.segment<3>(next.dgu_offset(slot) + 3) = xb;
      for (const auto& [i, j] : e.edges) {
        graph_.add_edge(i, j);
      }
      layout_ = next;
      x = y;
      ++graph_id_;
      break;
    }
    case EventKind::PlugOut: {
      StateLayout next = layout_;
      next.active.erase(std::find(next.active.begin(), next.active.end(), e.dgu));
      VecX y = VecX::Zero(next.dimension());
      for (int b = 0; b < next.count(); ++b) {
        const int a = layout_.slot_of(next.active[static_cast<std::size_t>(b)]);
        y.segment<StateLayout::kDgu>(next.dgu_offset(b)) = x.segment<StateLayout::kDgu>(layout_.dgu_offset(a));
        y.segment<StateLayout::kNode>(next.node_offset(b)) = x.segment<StateLayout::kNode>(layout_.node_offset(a));
      }
      for (int j = 0; j < graph_.size(); ++j) {
        if (j != e.dgu) {
          graph_.remove_edge(e.dgu, j);
        }
      }
      layout_ = next;
      x = y;
      ++graph_id_;
      break;
    }
    case EventKind::LinkFail:
      for (const auto& [i, j] : e.edges) {
        graph_.remove_edge(i, j);
      }
      ++graph_id_;
      break;
    case EventKind::LinkAdd:
      for (const auto& [i, j] : e.edges) {
        graph_.add_edge(i, j);
      }
      ++graph_id_;
      break;
    case EventKind::LoadStep:
      for (std::size_t k = 0; k < scenario_->loads.size(); ++k) {
        if (scenario_->loads[k].name == e.load) {
          load_power_[k] = e.value;
        }
      }
      break;
    case EventKind::SetpointChange:
      v_bus_ref_ = e.value;
      break;
  }
  rebuild();
}

template <bool Parallel>
VecX SimModel::derivative(const VecX& x, std::vector<DguSignals>* signals) const {
  const int n = layout_.count();
  const auto& sec = scenario_->secondary;
  VecX dx(x.size());

  // Network and secondary layer, evaluated once per stage.
  VecX v(n);
  VecX i_net(n);
  VecX y_ref(n);
  VecX w(n);
  for (int a = 0; a < n; ++a) {
    v(a) = dgu_design(a).op.v_dc + x(layout_.dgu_offset(a) + 1);
  }
  for (int a = 0; a < n; ++a) {
    double coupling = 0.0;
    for (int b = 0; b < n; ++b) {
      coupling += net_.g_ij(a, b) * (v(a) - v(b));
    }
    i_net(a) = coupling + load_current(a, v(a));
    w(a) = i_net(a) - dgu_design(a).i_out_nominal;
  }

  VecX z_v(n), z_i(n), pi_v(n), pi_i(n), scaled_i(n);
  for (int a = 0; a < n; ++a) {
    const int o = layout_.node_offset(a);
    z_v(a) = x(o);
    z_i(a) = x(o + 1);
    pi_v(a) = x(o + 2);
    pi_i(a) = x(o + 3);
    scaled_i(a) = i_net(a) / cache_[static_cast<std::size_t>(a)].m;
  }
  const VecX e_v = VecX::Constant(n, v_bus_ref_) - (v - z_v);
  const VecX e_i = -z_i;
  VecX dv = VecX::Zero(n);
  VecX di = VecX::Zero(n);
  if (sec.enabled) {
    dv = sec.kp_v * e_v + sec.ki_v * pi_v;
    di = sec.kp_i * e_i + sec.ki_i * pi_i;
    const VecX rz_v = lap_ * (v - z_v);
    const VecX rz_i = lap_ * (scaled_i - z_i);
    for (int a = 0; a < n; ++a) {
      const int o = layout_.node_offset(a);
      dx(o) = rz_v(a);
      dx(o + 1) = rz_i(a);
      dx(o + 2) = e_v(a);
      dx(o + 3) = e_i(a);
    }
  } else {
    for (int a = 0; a < n; ++a) {
      dx.segment<StateLayout::kNode>(layout_.node_offset(a)).setZero();
    }
  }
  for (int a = 0; a < n; ++a) {
    y_ref(a) = v_bus_ref_ + dv(a) + di(a) - dgu_design(a).op.v_dc;
  }

  // Per-DGU plant, predictor, adaptive law and filter.
#pragma omp parallel for schedule(static) num_threads(threads_) if (Parallel)
  for (int a = 0; a < n; ++a) {
    const DguDesign& dd = dgu_design(a);
    const DguCache& c = cache_[static_cast<std::size_t>(a)];
    const int o = layout_.dgu_offset(a);
    const Vec3 xb = x.segment<3>(o);
    const Vec3 xh = x.segment<3>(o + 3);
    const Vec3 th = x.segment<3>(o + 6);
    const Vec2 fs = x.segment<2>(o + 9);
    const double u = l1ac::control_law(dd.gains, dd.filter, xb, fs);
    const double u_l1 = -l1ac::filter_output(dd.filter, fs);
    const double w_meas = w(a) - c.y_design * xb(1);
    const Vec3& b = dd.design_plant.b_bar;
    const Vec3& e = dd.design_plant.e_bar;
    const Vec3& f = dd.design_plant.f;

    dx.segment<3>(o) = c.a_loc * xb + b * (u + c.theta_star.dot(xb)) + e * w(a) + f * y_ref(a);
    dx.segment<3>(o + 3) = dd.dd.a_m * xh + dd.dd.b_m * (u_l1 + th.dot(xb)) + f * y_ref(a) + e * w_meas;
    dx.segment<3>(o + 6) = l1ac::adaptive_rate(dd.dd, dd.projection, c.gamma, th, xh - xb, xb);
    dx.segment<2>(o + 9) = l1ac::filter_derivative(dd.filter, fs, th.dot(xb));

    if (signals != nullptr) {
      DguSignals& s = (*signals)[static_cast<std::size_t>(a)];
      s.v = v(a);
      s.i_t = dd.op.i_dc + xb(0);
      s.i_out = i_net(a);
      s.u = u;
      s.v_ref = y_ref(a) + dd.op.v_dc;
      s.v_hat = v(a) - z_v(a);
      s.i_ref_out = scaled_i(a) - z_i(a);
      s.dv = dv(a);
      s.di = di(a);
    }
  }
  return dx;
}

VecX SimModel::derivative_serial(const VecX& x, std::vector<DguSignals>* signals) const {
  if (signals != nullptr) {
    signals->assign(static_cast<std::size_t>(layout_.count()), DguSignals{});
  }
  return derivative<false>(x, signals);
}

VecX SimModel::derivative_parallel(const VecX& x, std::vector<DguSignals>* signals) const {
  if (signals != nullptr) {
    signals->assign(static_cast<std::size_t>(layout_.count()), DguSignals{});
  }
  return derivative<true>(x, signals);
}

double SimModel::bus_voltage(const std::vector<DguSignals>& signals) const {
  std::vector<double> v;
  std::vector<double> r;
  for (int a = 0; a < layout_.count(); ++a) {
    v.push_back(signals[static_cast<std::size_t>(a)].v);
    r.push_back(dgu(a).spec.r_line);
  }
  double p_cpl = 0.0;
  double i_sink = 0.0;
  for (std::size_t k = 0; k < scenario_->loads.size(); ++k) {
    if (scenario_->loads[k].kind == netmodel::LoadKind::Linear) {
      i_sink += load_power_[k] / scenario_->v_bus_ref;
    } else {
      p_cpl += load_power_[k];
    }
  }
  try {
    return netmodel::solve_bus_voltage(v, r, -p_cpl, i_sink);
  } catch (const std::exception&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

int TraceLog::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  return it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
}

std::vector<double> TraceLog::series(const std::string& name) const {
  const int c = column(name);
  if (c < 0) {
    throw DomainError("trace has no column '" + name + "'");
  }
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    out.push_back(r[static_cast<std::size_t>(c)]);
  }
  return out;
}

void TraceLog::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) {
    throw DomainError("cannot write '" + path + "'");
  }
  out << 't';
  for (const auto& c : columns) {
    out << ',' << c;
  }
  out << '\n';
  char buf[32];
  for (std::size_t k = 0; k < rows.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.9g", t[k]);
    out << buf;
    for (double v : rows[k]) {
      std::snprintf(buf, sizeof buf, "%.9g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

json TraceLog::events_json() const {
  json a = json::array();
  for (const auto& ae : events) {
    json j{{"t_seconds", ae.t},
           {"kind", to_string(ae.event.kind)},
           {"state_dimension", ae.dimension_after},
           {"graph_id", ae.graph_id_after}};
    const auto& e = ae.event;
    if (e.dgu >= 0) {
      j["dgu"] = e.dgu;
    }
    if (!e.edges.empty()) {
      json edges = json::array();
      for (const auto& [p, q] : e.edges) {
        edges.push_back({p, q});
      }
      j["edges"] = edges;
    }
    if (e.kind == EventKind::LoadStep) {
      j["load"] = e.load;
      j["power_watts"] = e.value;
    }
    if (e.kind == EventKind::SetpointChange) {
      j["v_bus_ref_volts"] = e.value;
    }
    a.push_back(j);
  }
  return a;
}

namespace {

std::vector<double> sample_row(const SimModel& model, const VecX& x, int n_total) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const auto& layout = model.layout();
  const int state_width = n_total * (StateLayout::kDgu + StateLayout::kNode);
  std::vector<double> row(static_cast<std::size_t>(state_width + 10 * n_total + 4), nan);

  std::vector<DguSignals> sig;
  model.derivative_serial(x, &sig);

  double v_sum = 0.0;
  for (int a = 0; a < layout.count(); ++a) {
    const int d = layout.active[static_cast<std::size_t>(a)];
    for (int k = 0; k < StateLayout::kDgu; ++k) {
      row[static_cast<std::size_t>(StateLayout::kDgu * d + k)] = x(layout.dgu_offset(a) + k);
    }
    for (int k = 0; k < StateLayout::kNode; ++k) {
      row[static_cast<std::size_t>(StateLayout::kDgu * n_total + StateLayout::kNode * d + k)] =
          x(layout.node_offset(a) + k);
    }
    const DguSignals& s = sig[static_cast<std::size_t>(a)];
    const double derived[] = {s.v,     s.i_t,   s.i_out,     s.u,  x(layout.dgu_offset(a) + 2),
                              s.v_ref, s.v_hat, s.i_ref_out, s.dv, s.di};
    for (int k = 0; k < 10; ++k) {
      row[static_cast<std::size_t>(state_width + 10 * d + k)] = derived[k];
    }
    v_sum += s.v;
  }
  const std::size_t g = static_cast<std::size_t>(state_width + 10 * n_total);
  row[g] = layout.count() > 0 ? v_sum / layout.count() : nan;
  row[g + 1] = model.bus_voltage(sig);
  row[g + 2] = model.graph_id();
  row[g + 3] = layout.count();
  return row;
}

}  // namespace

TraceLog run_scenario(const Scenario& s, const RunOptions& options) {
  if (const auto v = validate_scenario(s); !v.empty()) {
    throw DomainError("invalid scenario: " + v.front());
  }
  const ScenarioDesign design = design_scenario(s);
  TraceLog log;
  log.columns = state_columns(s);
  const auto derived = derived_columns(s);
  log.columns.insert(log.columns.end(), derived.begin(), derived.end());
  for (std::size_t i = 0; i < design.dgus.size(); ++i) {
    if (design.dgus[i].lambda >= 1.0) {
      log.warnings.push_back(s.dgus[i].name + ": lambda = " + std::to_string(design.dgus[i].lambda) +
                             " >= 1, the L1 performance bounds do not apply");
    }
  }

  SimModel model(s, design);
  VecX x = model.initial_state();
  const auto steps = static_cast<long long>(std::llround(s.horizon / s.dt));
  std::multimap<long long, const Event*> pending;
  for (const auto& e : s.events) {
    pending.emplace(std::llround(e.t / s.dt), &e);
  }

  bool parallel = options.kernel == RunOptions::Kernel::Parallel;
  if (options.kernel == RunOptions::Kernel::Auto) {
    parallel = s.size() >= s.parallel_min_dgus;
  }
  auto f = [&](double, const VecX& y) {
    return parallel ? model.derivative_parallel(y) : model.derivative_serial(y);
  };

  const int n_total = s.size();
  for (long long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * s.dt;
    auto [lo, hi] = pending.equal_range(k);
    for (auto it = lo; it != hi; ++it) {
      model.apply(*it->second, x);
      log.events.push_back({t, *it->second, model.layout().dimension(), model.graph_id()});
    }
    if (k % s.decimate == 0) {
      log.t.push_back(t);
      log.rows.push_back(sample_row(model, x, n_total));
    }
    if (k == steps) {
      break;
    }
    try {
      VecX next = rk4_step(f, x, t, s.dt);
      if (const auto bad = first_non_finite(next); bad >= 0) {
        throw NumericalAbort("non-finite state component " + std::to_string(bad) + " at t=" + std::to_string(t));
      }
      x = std::move(next);
    } catch (const NumericalAbort& e) {
      log.aborted = true;
      log.abort_message = e.what();
      break;
    }
  }
  return log;
}

SingleLoopResult single_dgu_loop(const l1ac::DesiredDynamics& dd, const l1ac::FilterSpec& filter,
                                 const l1ac::Projection& proj, double gamma, const Vec3& theta_star, double y_ref,
                                 double horizon, double dt, int decimate) {
  // [x(3), x_hat(3), theta_hat(3), filter(2), x_ref(3), ref filter(2)]
  using State = Eigen::Matrix<double, 16, 1>;
  auto f = [&](double, const State& s) {
    const Vec3 x = s.segment<3>(0);
    const Vec3 xh = s.segment<3>(3);
    const Vec3 th = s.segment<3>(6);
    const Vec2 fs = s.segment<2>(9);
    const double u_l1 = -l1ac::filter_output(filter, fs);
    State d;
    d.segment<3>(0) = dd.a_m * x + dd.b_m * (u_l1 + theta_star.dot(x)) + dd.f * y_ref;
    d.segment<3>(3) = dd.a_m * xh + dd.b_m * (u_l1 + th.dot(x)) + dd.f * y_ref;
    d.segment<3>(6) = l1ac::adaptive_rate(dd, proj, gamma, th, xh - x, x);
    d.segment<2>(9) = l1ac::filter_derivative(filter, fs, th.dot(x));
    d.segment<5>(11) = l1ac::reference_model_derivative(dd, filter, theta_star, s.segment<5>(11), y_ref);
    return d;
  };
  SingleLoopResult r;
  State s = State::Zero();
  const auto steps = static_cast<long long>(std::llround(horizon / dt));
  for (long long k = 0; k <= steps; ++k) {
    const Vec3 x = s.segment<3>(0);
    const Vec3 x_tilde = s.segment<3>(3) - x;
    const double ref_err = (x - s.segment<3>(11)).cwiseAbs().maxCoeff();
    r.peak_ref_error = std::max(r.peak_ref_error, ref_err);
    r.peak_x_tilde = std::max(r.peak_x_tilde, x_tilde.norm());
    if (k % decimate == 0) {
      r.t.push_back(static_cast<double>(k) * dt);
      r.x_tilde_norm.push_back(x_tilde.norm());
      r.lyapunov.push_back(l1ac::lyapunov_value(dd, gamma, x_tilde, Vec3(s.segment<3>(6) - theta_star)));
      r.ref_error_inf.push_back(ref_err);
      r.x_bar.push_back(x);
    }
    if (k < steps) {
      s = rk4_step(f, s, static_cast<double>(k) * dt, dt);
    }
  }
  return r;
}

}  // namespace mgsim::sim

#include "mgsim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace mgsim::sim {

using nlohmann::json;
using netmodel::ConverterKind;

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::PlugIn:
      return "plug_in";
    case EventKind::PlugOut:
      return "plug_out";
    case EventKind::LinkFail:
      return "link_fail";
    case EventKind::LinkAdd:
      return "link_add";
    case EventKind::LoadStep:
      return "load_step";
    case EventKind::SetpointChange:
      return "setpoint_change";
  }
  return "unknown";
}

EventKind event_kind_from_string(const std::string& s) {
  for (auto k : {EventKind::PlugIn, EventKind::PlugOut, EventKind::LinkFail, EventKind::LinkAdd, EventKind::LoadStep,
                 EventKind::SetpointChange}) {
    if (to_string(k) == s) {
      return k;
    }
  }
  throw DomainError("unknown event kind '" + s + "'");
}

namespace {

template <typename T>
T field(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) {
    throw DomainError(where + ": missing field '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DomainError(where + "." + key + ": " + e.what());
  }
}

template <typename T>
T field_or(const json& j, const std::string& key, T fallback, const std::string& where) {
  return j.contains(key) ? field<T>(j, key, where) : fallback;
}

Vec3 vec3(const json& j, const std::string& where) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) {
    throw DomainError(where + ": expected 3 numbers");
  }
  return {v[0], v[1], v[2]};
}

std::vector<std::pair<int, int>> edge_list(const json& j, const std::string& where) {
  std::vector<std::pair<int, int>> out;
  for (const auto& e : j) {
    const auto v = e.get<std::vector<int>>();
    if (v.size() != 2) {
      throw DomainError(where + ": each edge needs two node indices");
    }
    out.emplace_back(v[0], v[1]);
  }
  return out;
}

json edges_to_json(const std::vector<std::pair<int, int>>& edges) {
  json a = json::array();
  for (const auto& [i, j] : edges) {
    a.push_back({i, j});
  }
  return a;
}

ControllerConfig parse_controller(const json& j, const std::string& where) {
  ControllerConfig c;
  if (j.contains("gains")) {
    const Vec3 k = vec3(j.at("gains"), where + ".gains");
    c.gains = RowVec3(k(0), k(1), k(2));
  }
  if (j.contains("poles_rad_per_s")) {
    const auto& p = j.at("poles_rad_per_s");
    if (!p.is_array() || p.size() != 3) {
      throw DomainError(where + ".poles_rad_per_s: expected three [re, im] pairs");
    }
    std::array<Complex, 3> poles;
    for (std::size_t k = 0; k < 3; ++k) {
      const auto pair = p[k].get<std::vector<double>>();
      if (pair.size() != 2) {
        throw DomainError(where + ".poles_rad_per_s: expected [re, im]");
      }
      poles[k] = Complex(pair[0], pair[1]);
    }
    c.poles = poles;
  }
  c.gamma = field_or(j, "Gamma", c.gamma, where);
  c.omega_c = field_or(j, "omega_c_rad_per_s", c.omega_c, where);
  if (j.contains("Q_diag")) {
    c.q_diag = vec3(j.at("Q_diag"), where + ".Q_diag");
  }
  c.projection_epsilon = field_or(j, "projection_epsilon", c.projection_epsilon, where);
  c.omega_z = field_or(j, "omega_z_rad_per_s", c.omega_z, where);
  if (j.contains("c0")) {
    c.c0 = vec3(j.at("c0"), where + ".c0");
  }
  if (j.contains("nominal_P_cpl_watts")) {
    c.nominal_p_cpl = field<double>(j, "nominal_P_cpl_watts", where);
  }
  if (j.contains("design_line_conductance_siemens")) {
    c.design_line_g = field<double>(j, "design_line_conductance_siemens", where);
  }
  if (j.contains("P_cpl_range_watts")) {
    const auto r = field<std::vector<double>>(j, "P_cpl_range_watts", where);
    if (r.size() != 2) {
      throw DomainError(where + ".P_cpl_range_watts: expected [lo, hi]");
    }
    c.p_cpl_range = std::make_pair(r[0], r[1]);
  }
  if (j.contains("theta_box")) {
    const auto& b = j.at("theta_box");
    c.theta_box = netmodel::ThetaBox{vec3(b.at("lo"), where + ".theta_box.lo"), vec3(b.at("hi"), where + ".theta_box.hi")};
  }
  if (j.contains("theta_star")) {
    c.theta_star = vec3(j.at("theta_star"), where + ".theta_star");
  }
  return c;
}

json controller_to_json(const ControllerConfig& c) {
  json j;
  if (c.gains) {
    j["gains"] = {(*c.gains)(0), (*c.gains)(1), (*c.gains)(2)};
  }
  if (c.poles) {
    json p = json::array();
    for (const auto& z : *c.poles) {
      p.push_back({z.real(), z.imag()});
    }
    j["poles_rad_per_s"] = p;
  }
  j["Gamma"] = c.gamma;
  j["omega_c_rad_per_s"] = c.omega_c;
  j["Q_diag"] = {c.q_diag(0), c.q_diag(1), c.q_diag(2)};
  j["projection_epsilon"] = c.projection_epsilon;
  j["omega_z_rad_per_s"] = c.omega_z;
  if (c.c0) {
    j["c0"] = {(*c.c0)(0), (*c.c0)(1), (*c.c0)(2)};
  }
  if (c.nominal_p_cpl) {
    j["nominal_P_cpl_watts"] = *c.nominal_p_cpl;
  }
  if (c.design_line_g) {
    j["design_line_conductance_siemens"] = *c.design_line_g;
  }
  if (c.p_cpl_range) {
    j["P_cpl_range_watts"] = {c.p_cpl_range->first, c.p_cpl_range->second};
  }
  if (c.theta_box) {
    const auto& b = *c.theta_box;
    j["theta_box"] = {{"lo", {b.lo(0), b.lo(1), b.lo(2)}}, {"hi", {b.hi(0), b.hi(1), b.hi(2)}}};
  }
  j["theta_star"] = {c.theta_star(0), c.theta_star(1), c.theta_star(2)};
  return j;
}

}  // namespace

Scenario parse_scenario(const json& j) {
  Scenario s;
  if (!j.is_object()) {
    throw DomainError("scenario: top level must be an object");
  }
  s.name = field_or<std::string>(j, "name", s.name, "scenario");
  s.v_bus_ref = field_or(j, "v_bus_ref_volts", s.v_bus_ref, "scenario");
  s.dt = field_or(j, "dt_seconds", s.dt, "scenario");
  s.horizon = field_or(j, "horizon_seconds", s.horizon, "scenario");
  s.decimate = field_or(j, "decimate", s.decimate, "scenario");
  s.parallel_min_dgus = field_or(j, "parallel_min_dgus", s.parallel_min_dgus, "scenario");

  if (!j.contains("dgus") || !j.at("dgus").is_array()) {
    throw DomainError("scenario: missing array 'dgus'");
  }
  int idx = 0;
  for (const auto& d : j.at("dgus")) {
    const std::string where = "dgus[" + std::to_string(idx) + "]";
    DguConfig c;
    c.name = field_or<std::string>(d, "name", "DGU" + std::to_string(idx + 1), where);
    c.spec.kind = netmodel::converter_kind_from_string(field<std::string>(d, "kind", where));
    c.spec.v_in = field<double>(d, "V_in_volts", where);
    c.spec.r_t = field<double>(d, "R_t_ohms", where);
    c.spec.l_t = field<double>(d, "L_t_henries", where);
    c.spec.c_t = field<double>(d, "C_t_farads", where);
    c.spec.r_line = field<double>(d, "R_line_ohms", where);
    c.initially_connected = field_or(d, "initially_connected", true, where);
    c.islanded_load = field_or(d, "islanded_load_amps", 0.0, where);
    if (d.contains("islanded_v_ref_volts")) {
      c.islanded_v_ref = field<double>(d, "islanded_v_ref_volts", where);
    }
    c.controller = parse_controller(d.value("controller", json::object()), where + ".controller");
    s.dgus.push_back(c);
    ++idx;
  }

  idx = 0;
  for (const auto& l : j.value("loads", json::array())) {
    const std::string where = "loads[" + std::to_string(idx) + "]";
    netmodel::BusLoad b;
    b.name = field_or<std::string>(l, "name", "load" + std::to_string(idx + 1), where);
    const auto kind = field<std::string>(l, "kind", where);
    if (kind == "constant_power") {
      b.kind = netmodel::LoadKind::ConstantPower;
    } else if (kind == "linear") {
      b.kind = netmodel::LoadKind::Linear;
    } else {
      throw DomainError(where + ".kind: expected 'constant_power' or 'linear'");
    }
    b.power = field<double>(l, "power_watts", where);
    b.line_r = field_or(l, "R_line_ohms", 0.01, where);
    s.loads.push_back(b);
    ++idx;
  }

  if (j.contains("secondary")) {
    const auto& sc = j.at("secondary");
    const std::string where = "secondary";
    s.secondary.enabled = field_or(sc, "enabled", true, where);
    s.secondary.kp_v = field_or(sc, "kP_v", s.secondary.kp_v, where);
    s.secondary.ki_v = field_or(sc, "kI_v", s.secondary.ki_v, where);
    s.secondary.kp_i = field_or(sc, "kP_i", s.secondary.kp_i, where);
    s.secondary.ki_i = field_or(sc, "kI_i", s.secondary.ki_i, where);
    s.secondary.m = field_or(sc, "m", std::vector<double>{}, where);
    const auto graph = field_or<std::string>(sc, "graph", "sparse", where);
    if (graph == "sparse") {
      s.secondary.graph = GraphMode::Sparse;
    } else if (graph == "complete") {
      s.secondary.graph = GraphMode::Complete;
    } else {
      throw DomainError("secondary.graph: expected 'sparse' or 'complete'");
    }
    if (sc.contains("edges")) {
      s.secondary.edges = edge_list(sc.at("edges"), "secondary.edges");
    }
  }

  idx = 0;
  for (const auto& e : j.value("events", json::array())) {
    const std::string where = "events[" + std::to_string(idx) + "]";
    Event ev;
    ev.t = field<double>(e, "t_seconds", where);
    ev.kind = event_kind_from_string(field<std::string>(e, "kind", where));
    switch (ev.kind) {
      case EventKind::PlugIn:
        ev.dgu = field<int>(e, "dgu", where);
        if (e.contains("edges_add")) {
          ev.edges = edge_list(e.at("edges_add"), where + ".edges_add");
        }
        break;
      case EventKind::PlugOut:
        ev.dgu = field<int>(e, "dgu", where);
        break;
      case EventKind::LinkFail:
      case EventKind::LinkAdd:
        ev.edges = edge_list(field<json>(e, "edges", where), where + ".edges");
        break;
      case EventKind::LoadStep:
        ev.load = field<std::string>(e, "load", where);
        ev.value = field<double>(e, "power_watts", where);
        break;
      case EventKind::SetpointChange:
        ev.value = field<double>(e, "v_bus_ref_volts", where);
        break;
    }
    s.events.push_back(ev);
    ++idx;
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DomainError("cannot open scenario file '" + path + "'");
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DomainError("scenario '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_scenario(j);
}

json scenario_to_json(const Scenario& s) {
  json j;
  j["name"] = s.name;
  j["v_bus_ref_volts"] = s.v_bus_ref;
  j["dt_seconds"] = s.dt;
  j["horizon_seconds"] = s.horizon;
  j["decimate"] = s.decimate;
  j["parallel_min_dgus"] = s.parallel_min_dgus;
  j["dgus"] = json::array();
  for (const auto& d : s.dgus) {
    json dj;
    dj["name"] = d.name;
    dj["kind"] = netmodel::to_string(d.spec.kind);
    dj["V_in_volts"] = d.spec.v_in;
    dj["R_t_ohms"] = d.spec.r_t;
    dj["L_t_henries"] = d.spec.l_t;
    dj["C_t_farads"] = d.spec.c_t;
    dj["R_line_ohms"] = d.spec.r_line;
    dj["initially_connected"] = d.initially_connected;
    dj["islanded_load_amps"] = d.islanded_load;
    if (d.islanded_v_ref) {
      dj["islanded_v_ref_volts"] = *d.islanded_v_ref;
    }
    dj["controller"] = controller_to_json(d.controller);
    j["dgus"].push_back(dj);
  }
  j["loads"] = json::array();
  for (const auto& l : s.loads) {
    j["loads"].push_back({{"name", l.name},
                          {"kind", l.kind == netmodel::LoadKind::ConstantPower ? "constant_power" : "linear"},
                          {"power_watts", l.power},
                          {"R_line_ohms", l.line_r}});
  }
  const auto& sc = s.secondary;
  j["secondary"] = {{"enabled", sc.enabled},
                    {"kP_v", sc.kp_v},
                    {"kI_v", sc.ki_v},
                    {"kP_i", sc.kp_i},
                    {"kI_i", sc.ki_i},
                    {"m", sc.m},
                    {"graph", sc.graph == GraphMode::Complete ? "complete" : "sparse"},
                    {"edges", edges_to_json(sc.edges)}};
  j["events"] = json::array();
  for (const auto& e : s.events) {
    json ej{{"t_seconds", e.t}, {"kind", to_string(e.kind)}};
    switch (e.kind) {
      case EventKind::PlugIn:
        ej["dgu"] = e.dgu;
        ej["edges_add"] = edges_to_json(e.edges);
        break;
      case EventKind::PlugOut:
        ej["dgu"] = e.dgu;
        break;
      case EventKind::LinkFail:
      case EventKind::LinkAdd:
        ej["edges"] = edges_to_json(e.edges);
        break;
      case EventKind::LoadStep:
        ej["load"] = e.load;
        ej["power_watts"] = e.value;
        break;
      case EventKind::SetpointChange:
        ej["v_bus_ref_volts"] = e.value;
        break;
    }
    j["events"].push_back(ej);
  }
  return j;
}

netmodel::BusNetwork full_network(const Scenario& s) {
  netmodel::BusNetwork net;
  for (const auto& d : s.dgus) {
    net.dgus.push_back(d.spec);
    netmodel::OperatingPoint op;
    op.v_dc = s.v_bus_ref;
    net.ops.push_back(op);
  }
  net.loads = s.loads;
  net.v_nominal = s.v_bus_ref;
  return net;
}

ScenarioDesign design_scenario(const Scenario& s) {
  ScenarioDesign out;
  const netmodel::BusNetwork net = full_network(s);
  out.kron = netmodel::kron_reduce(net);
  const auto n = static_cast<std::size_t>(s.size());
  for (std::size_t i = 0; i < n; ++i) {
    const DguConfig& cfg = s.dgus[i];
    const ControllerConfig& cc = cfg.controller;
    DguDesign d;
    d.i_out_nominal = out.kron.i_load[i];
    // The network common mode carries no line damping, so the default design
    // plant is the islanded one.
    d.line_g_design = cc.design_line_g.value_or(0.0);
    d.p_cpl_design = cc.nominal_p_cpl.value_or(out.kron.p_cpl[i]);
    d.op = netmodel::make_operating_point(cfg.spec, s.v_bus_ref, d.i_out_nominal, d.p_cpl_design);
    d.design_plant = stability::plant_at(cfg.spec, d.op, d.p_cpl_design, d.line_g_design);
    if (cc.gains) {
      d.gains.k = *cc.gains;
    } else if (cc.poles) {
      d.gains = l1ac::place_poles(d.design_plant, *cc.poles);
    } else {
      throw DomainError(cfg.name + ": controller needs gains or poles_rad_per_s");
    }
    d.filter.omega_c = cc.omega_c;
    const Vec3 c0 = cc.c0.value_or(l1ac::default_c0(cfg.spec.c_t, cc.omega_z));
    d.dd = l1ac::make_desired_dynamics(d.design_plant, d.gains, cc.q_diag.asDiagonal().toDenseMatrix(), c0);
    if (cc.theta_box) {
      d.design_plant.theta_set = *cc.theta_box;
      d.theta_max = stability::theta_max_from_box(*cc.theta_box);
    } else {
      const auto range = cc.p_cpl_range.value_or(std::make_pair(0.0, 2.0 * d.p_cpl_design));
      const stability::PlantRanges pr{range.first, range.second, d.line_g_design, d.line_g_design};
      const auto ub = stability::uncertainty_bound(cfg.spec, d.op, pr, d.gains, d.dd.a_m);
      d.theta_max = ub.theta_max;
      d.theta_star_worst = ub.theta_star_worst;
    }
    d.projection.epsilon = cc.projection_epsilon;
    d.projection.bound = std::max(std::sqrt(d.theta_max) / 2.0, 1e-12);
    d.lambda = stability::lambda_condition(d.dd.a_m, d.dd.b_m, d.filter, d.theta_max);
    out.dgus.push_back(d);
  }
  return out;
}

double max_natural_frequency(const Scenario& s) {
  double w = 0.0;
  for (const auto& d : s.dgus) {
    w = std::max(w, d.controller.omega_c);
    w = std::max(w, 1.0 / std::sqrt(d.spec.l_t * d.spec.c_t));
  }
  try {
    for (const auto& d : design_scenario(s).dgus) {
      for (const auto& ev : eigenvalues(d.dd.a_m)) {
        w = std::max(w, std::abs(ev));
      }
    }
  } catch (const std::exception&) {
    // design errors are reported separately by validate_scenario
  }
  return w;
}

std::vector<std::string> validate_scenario(const Scenario& s) {
  std::vector<std::string> v;
  auto check = [&](bool ok, const std::string& msg) {
    if (!ok) {
      v.push_back(msg);
    }
  };
  const int n = s.size();
  check(n > 0, "scenario needs at least one DGU");
  check(s.dt > 0.0, "dt_seconds must be > 0");
  check(s.horizon > 0.0, "horizon_seconds must be > 0");
  check(s.decimate >= 1, "decimate must be >= 1");
  check(s.v_bus_ref > 0.0, "v_bus_ref_volts must be > 0");

  int connected = 0;
  for (int i = 0; i < n; ++i) {
    const auto& d = s.dgus[static_cast<std::size_t>(i)];
    const std::string who = d.name + ": ";
    try {
      d.spec.validate();
    } catch (const std::exception& e) {
      v.push_back(who + e.what());
    }
    if (d.spec.kind == ConverterKind::Boost) {
      check(d.spec.v_in < s.v_bus_ref, who + "boost input voltage must be below the bus reference");
    } else {
      check(d.spec.v_in > s.v_bus_ref, who + "buck input voltage must exceed the bus reference");
    }
    const auto& c = d.controller;
    check(c.gains.has_value() || c.poles.has_value(), who + "controller needs gains or poles_rad_per_s");
    if (c.poles) {
      for (const auto& p : *c.poles) {
        check(p.real() < 0.0, who + "controller poles must have negative real part");
      }
    }
    check(c.gamma > 0.0, who + "Gamma must be > 0");
    check(c.omega_c > 0.0, who + "omega_c_rad_per_s must be > 0");
    check((c.q_diag.array() > 0.0).all(), who + "Q_diag entries must be > 0");
    check(c.projection_epsilon > 0.0, who + "projection_epsilon must be > 0");
    check(c.omega_z > 0.0, who + "omega_z_rad_per_s must be > 0");
    if (c.p_cpl_range) {
      check(c.p_cpl_range->first <= c.p_cpl_range->second, who + "P_cpl_range_watts must be ascending");
    }
    if (c.theta_box) {
      check((c.theta_box->lo.array() <= c.theta_box->hi.array()).all(), who + "theta_box lo must not exceed hi");
      check(c.theta_box->contains(c.theta_star), who + "theta_star lies outside theta_box");
    }
    check(d.islanded_load >= 0.0, who + "islanded_load_amps must be >= 0");
    connected += d.initially_connected ? 1 : 0;
  }
  check(n == 0 || connected > 0, "at least one DGU must be initially connected");

  std::set<std::string> names;
  for (const auto& l : s.loads) {
    check(names.insert(l.name).second, "duplicate load name '" + l.name + "'");
    check(l.power >= 0.0, "load '" + l.name + "' power must be >= 0");
    check(l.line_r > 0.0, "load '" + l.name + "' R_line_ohms must be > 0");
  }

  const auto& sc = s.secondary;
  check(sc.kp_v > 0.0 && sc.ki_v > 0.0 && sc.kp_i > 0.0 && sc.ki_i > 0.0, "secondary gains must be > 0");
  check(sc.m.empty() || static_cast<int>(sc.m.size()) == n, "secondary.m needs one entry per DGU");
  for (double m : sc.m) {
    check(m > 0.0, "secondary.m entries must be > 0");
  }
  auto check_edges = [&](const std::vector<std::pair<int, int>>& edges, const std::string& where) {
    std::set<std::pair<int, int>> seen;
    for (const auto& [a, b] : edges) {
      check(seen.insert(std::minmax(a, b)).second, where + ": edge (" + std::to_string(a) + "," +
                                                       std::to_string(b) + ") listed twice");
      check(a >= 0 && b >= 0 && a < n && b < n, where + ": edge (" + std::to_string(a) + "," + std::to_string(b) +
                                                    ") references an unknown DGU");
      check(a != b, where + ": self-loop on DGU " + std::to_string(a));
    }
  };
  check_edges(sc.edges, "secondary.edges");

  std::vector<bool> live(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    live[static_cast<std::size_t>(i)] = s.dgus[static_cast<std::size_t>(i)].initially_connected;
  }
  double prev = -1.0;
  for (std::size_t k = 0; k < s.events.size(); ++k) {
    const auto& e = s.events[k];
    const std::string where = "events[" + std::to_string(k) + "]";
    check(e.t > prev, where + ": events must be strictly time-ordered");
    check(e.t >= 0.0 && e.t <= s.horizon, where + ": time outside [0, horizon]");
    prev = e.t;
    switch (e.kind) {
      case EventKind::PlugIn:
      case EventKind::PlugOut: {
        const bool in_range = e.dgu >= 0 && e.dgu < n;
        check(in_range, where + ": unknown DGU index " + std::to_string(e.dgu));
        if (in_range) {
          auto flag = live[static_cast<std::size_t>(e.dgu)];
          if (e.kind == EventKind::PlugIn) {
            check(!flag, where + ": DGU " + std::to_string(e.dgu) + " is already connected");
            live[static_cast<std::size_t>(e.dgu)] = true;
          } else {
            check(flag, where + ": DGU " + std::to_string(e.dgu) + " is not connected");
            live[static_cast<std::size_t>(e.dgu)] = false;
          }
        }
        check_edges(e.edges, where);
        break;
      }
      case EventKind::LinkFail:
      case EventKind::LinkAdd:
        check(!e.edges.empty(), where + ": link event without edges");
        check_edges(e.edges, where);
        break;
      case EventKind::LoadStep:
        check(names.count(e.load) > 0, where + ": unknown load '" + e.load + "'");
        check(e.value >= 0.0, where + ": load power must be >= 0");
        break;
      case EventKind::SetpointChange:
        check(e.value > 0.0, where + ": setpoint must be > 0");
        break;
    }
  }

  if (v.empty()) {
    try {
      const auto design = design_scenario(s);
      for (int i = 0; i < n; ++i) {
        const auto& d = design.dgus[static_cast<std::size_t>(i)];
        const auto& c = s.dgus[static_cast<std::size_t>(i)].controller;
        check(c.theta_box.has_value() || c.theta_star.norm() <= d.projection.outer_radius(),
              s.dgus[static_cast<std::size_t>(i)].name + ": theta_star lies outside the projection set");
      }
      const double w = max_natural_frequency(s);
      check(s.dt <= 1.0 / (20.0 * w), "dt_seconds exceeds 1/(20 * max natural frequency) = " +
                                          std::to_string(1.0 / (20.0 * w)));
    } catch (const std::exception& e) {
      v.push_back(std::string("controller design failed: ") + e.what());
    }
  }
  return v;
}

}  // namespace mgsim::sim

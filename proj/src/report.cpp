#include "mgsim/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace mgsim::report {

using nlohmann::json;
using sim::Scenario;
using sim::ScenarioDesign;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

stability::TwoConverterSystem two_converter_system(const Scenario& s, const ScenarioDesign& d) {
  if (s.size() < 2) {
    return stability::default_two_converter_system();
  }
  stability::TwoConverterSystem sys;
  sys.dgu1 = s.dgus[0].spec;
  sys.dgu2 = s.dgus[1].spec;
  sys.op1 = d.dgus[0].op;
  sys.op2 = d.dgus[1].op;
  sys.r12 = sys.dgu1.r_line + sys.dgu2.r_line;
  sys.gains1 = d.dgus[0].gains;
  sys.gains2 = d.dgus[1].gains;
  return sys;
}

std::vector<stability::LoadStage> load_stages(const Scenario& s) {
  std::vector<stability::LoadStage> out;
  for (const auto& l : s.loads) {
    if (l.power > 0.0) {
      out.push_back({l.converter, l.power, s.v_bus_ref});
    }
  }
  return out;
}

std::vector<stability::CouplingBlock> coupling_blocks(const Scenario& s, const ScenarioDesign& d) {
  std::vector<stability::CouplingBlock> out;
  for (int i = 0; i < s.size(); ++i) {
    for (int j = 0; j < s.size(); ++j) {
      if (i == j) {
        continue;
      }
      stability::CouplingBlock b;
      b.i = i;
      b.j = j;
      b.a_ij(1, 1) = 1.0 / (d.kron.r_ij(i, j) * s.dgus[static_cast<std::size_t>(i)].spec.c_t);
      out.push_back(b);
    }
  }
  return out;
}

namespace {

json complex_list(const std::vector<Complex>& v) {
  json a = json::array();
  for (const auto& z : v) {
    a.push_back({z.real(), z.imag()});
  }
  return a;
}

json dgu_report(const sim::DguConfig& cfg, const sim::DguDesign& d, bool& ok) {
  const l1ac::GainParams gp{cfg.spec.r_t, cfg.spec.l_t,    cfg.spec.c_t,        d.op.duty,
                            d.op.v_dc,    d.op.i_dc,       d.line_g_design,     d.p_cpl_design};
  const auto gr = l1ac::validate_gains(d.gains, cfg.spec.kind, gp);
  json conds = json::array();
  for (const auto& c : gr.conditions) {
    conds.push_back(
        {{"name", c.name}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"slack", c.slack}, {"satisfied", c.satisfied}});
  }
  const Mat3 a_m = d.dd.a_m;
  json j{{"name", cfg.name},
         {"kind", netmodel::to_string(cfg.spec.kind)},
         {"gains", {d.gains.k(0), d.gains.k(1), d.gains.k(2)}},
         {"desired_poles", complex_list(eigenvalues(a_m))},
         {"operating_point", {{"duty", d.op.duty}, {"v_dc", d.op.v_dc}, {"i_dc", d.op.i_dc}, {"p_cpl", d.op.p_cpl}}},
         {"gain_conditions", conds},
         {"printed_conditions_hold", gr.ok},
         {"trace_A_m", a_m.trace()},
         {"det_A_m", a_m.determinant()},
         {"trace_det_test", gr.trace_det_ok},
         {"routh_hurwitz", gr.routh_hurwitz_ok},
         {"max_real_eig_A_m", gr.max_real_eig},
         {"theta_max", d.theta_max},
         {"lambda", d.lambda},
         {"lambda_ok", d.lambda < 1.0}};
  if (!gr.caveat.empty()) {
    j["caveat"] = gr.caveat;
  }
  ok = ok && d.lambda < 1.0;
  const double gamma = cfg.controller.gamma;
  try {
    const auto pb = stability::performance_bounds(d.theta_max / gamma, gamma, d.dd, d.theta_max, d.filter);
    j["gamma1"] = pb.gamma1;
    j["gamma2"] = pb.gamma2;
    j["state_bound"] = pb.state_bound;
    j["control_bound"] = pb.control_bound;
    j["filter_l1_norm"] = pb.c_norm;
    j["h1_l1_norm"] = pb.h1_norm;
  } catch (const std::exception& e) {
    j["gamma1"] = "unavailable";
    j["gamma2"] = "unavailable";
    j["bounds_error"] = e.what();
  }
  return j;
}

}  // namespace

Analysis analyze(const Scenario& s, const AnalysisOptions& o) {
  Analysis a;
  const ScenarioDesign d = sim::design_scenario(s);
  bool ok = true;

  json dgus = json::array();
  std::vector<l1ac::DesiredDynamics> locals;
  for (int i = 0; i < s.size(); ++i) {
    dgus.push_back(dgu_report(s.dgus[static_cast<std::size_t>(i)], d.dgus[static_cast<std::size_t>(i)], ok));
    locals.push_back(d.dgus[static_cast<std::size_t>(i)].dd);
  }

  const auto blocks = coupling_blocks(s, d);
  const auto global = stability::global_stability_check(locals, blocks);
  ok = ok && global.pass;

  a.sweep_grid = stability::log_grid(o.sweep_lo, o.sweep_hi, o.sweep_points);
  for (const auto& dg : d.dgus) {
    const auto sweep = stability::sweep_filter_bandwidth(dg.dd.a_m, dg.dd.b_m, dg.theta_max, a.sweep_grid);
    std::vector<double> lam;
    for (const auto& p : sweep.points) {
      lam.push_back(p.lambda);
    }
    a.sweep_lambda.push_back(lam);
  }

  const auto stages = load_stages(s);
  if (!stages.empty()) {
    a.admittance = stability::input_admittance(stages, stability::log_grid(o.bode_lo, o.bode_hi, o.bode_points));
  }
  a.locus = stability::eigen_locus(two_converter_system(s, d),
                                   stability::linear_grid(o.locus_lo, o.locus_hi, o.locus_points));

  const l1ac::FilterSpec filter{s.dgus.empty() ? 3000.0 : s.dgus.front().controller.omega_c};
  a.verdict = ok;
  a.summary = {{"scenario", s.name},
               {"verdict", ok ? "pass" : "fail"},
               {"filter",
                {{"omega_c_rad_per_s", filter.omega_c},
                 {"numerator", filter.numerator()},
                 {"denominator", filter.denominator()}}},
               {"dgus", dgus},
               {"global_check",
                {{"pass", global.pass},
                 {"max_eig", global.max_eig},
                 {"norm_local", global.norm_local},
                 {"norm_coupling", global.norm_coupling},
                 {"critical_coupling_scale", stability::critical_coupling_scale(locals, blocks)}}},
               {"admittance",
                {{"loads", stages.size()},
                 {"crossover_rad_per_s", a.admittance.crossover}}}};
  return a;
}

void write_analysis(const Analysis& a, const Scenario& s, const std::string& dir) {
  auto open = [&](const std::string& name) {
    std::ofstream out(dir + "/" + name);
    if (!out) {
      throw DomainError("cannot write '" + dir + "/" + name + "'");
    }
    return out;
  };
  {
    auto out = open("analysis.json");
    out << a.summary.dump(2) << '\n';
  }
  {
    auto out = open("lambda_sweep.csv");
    out << "omega_c_rad_per_s";
    for (const auto& d : s.dgus) {
      out << ",lambda_" << d.name;
    }
    out << '\n';
    for (std::size_t k = 0; k < a.sweep_grid.size(); ++k) {
      out << fmt(a.sweep_grid[k]);
      for (const auto& lam : a.sweep_lambda) {
        out << ',' << fmt(lam[k]);
      }
      out << '\n';
    }
  }
  {
    auto out = open("bode.csv");
    out << "omega_rad_per_s,z_in_mag_db,z_in_phase_deg,z_d_mag_db,z_d_phase_deg,z_n_mag_db,z_n_phase_deg\n";
    auto db = [](Complex z) { return 20.0 * std::log10(std::abs(z)); };
    auto deg = [](Complex z) { return std::arg(z) * 180.0 / M_PI; };
    for (const auto& p : a.admittance.points) {
      const Complex z_d = 1.0 / p.y_zd_only;
      const Complex z_n = 1.0 / p.y_zn_only;
      out << fmt(p.omega) << ',' << fmt(db(p.z_in)) << ',' << fmt(deg(p.z_in)) << ',' << fmt(db(z_d)) << ','
          << fmt(deg(z_d)) << ',' << fmt(db(z_n)) << ',' << fmt(deg(z_n)) << '\n';
    }
  }
  {
    auto out = open("eiglocus.csv");
    const std::size_t n = a.locus.empty() ? 0 : a.locus.front().eig.size();
    out << "param";
    for (std::size_t k = 1; k <= n; ++k) {
      out << ",re_" << k << ",im_" << k;
    }
    out << '\n';
    for (const auto& p : a.locus) {
      out << fmt(p.r_cpl);
      for (const auto& z : p.eig) {
        out << ',' << fmt(z.real()) << ',' << fmt(z.imag());
      }
      out << '\n';
    }
  }
}

}  // namespace mgsim::report

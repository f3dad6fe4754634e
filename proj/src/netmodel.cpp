#include "mgsim/netmodel.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace mgsim::netmodel {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) {
    throw DomainError(what);
  }
}

bool rel_close(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b));
}

}  // namespace

std::string to_string(ConverterKind kind) { return kind == ConverterKind::Boost ? "boost" : "buck"; }

ConverterKind converter_kind_from_string(const std::string& s) {
  if (s == "boost" || s == "Boost") {
    return ConverterKind::Boost;
  }
  if (s == "buck" || s == "Buck") {
    return ConverterKind::Buck;
  }
  throw DomainError("unknown converter kind '" + s + "'");
}

void ConverterSpec::validate() const {
  require(l_t > 0.0, "L_t must be > 0");
  require(c_t > 0.0, "C_t must be > 0");
  require(r_t >= 0.0, "R_t must be >= 0");
  require(r_line > 0.0, "R_line must be > 0");
  require(v_in > 0.0, "V_in must be > 0");
}

void OperatingPoint::validate(const ConverterSpec& spec) const {
  require(duty >= 0.0 && duty < 1.0, "duty must lie in [0, 1)");
  require(p_cpl >= 0.0, "P_cpl must be >= 0");
  if (spec.kind == ConverterKind::Boost) {
    require(rel_close(v_dc * (1.0 - duty), spec.v_in, 1e-9), "boost operating point violates V_dc(1-D) = V_in");
  } else {
    require(rel_close(v_dc, duty * spec.v_in, 1e-9), "buck operating point violates V_dc = D V_in");
  }
}

OperatingPoint make_operating_point(const ConverterSpec& spec, double v_dc, double i_out, double p_cpl) {
  OperatingPoint op;
  op.v_dc = v_dc;
  op.p_cpl = p_cpl;
  if (spec.kind == ConverterKind::Boost) {
    require(v_dc >= spec.v_in, "boost output must be >= input voltage");
    op.duty = 1.0 - spec.v_in / v_dc;
    op.i_dc = i_out / (1.0 - op.duty);
  } else {
    require(v_dc <= spec.v_in, "buck output must be <= input voltage");
    op.duty = v_dc / spec.v_in;
    op.i_dc = i_out;
  }
  return op;
}

DguModel build_dgu_model(const ConverterSpec& spec, const OperatingPoint& op,
                         const std::map<int, double>& neighbor_lines) {
  spec.validate();
  op.validate(spec);
  DguModel m;
  m.kind = spec.kind;
  const double gain = spec.kind == ConverterKind::Boost ? 1.0 - op.duty : 1.0;
  double line_conductance = 0.0;
  for (const auto& [j, r] : neighbor_lines) {
    require(r > 0.0, "neighbour line resistance must be > 0");
    line_conductance += 1.0 / r;
    Mat2 a = Mat2::Zero();
    a(1, 1) = 1.0 / (r * spec.c_t);
    m.a_ij.emplace(j, a);
  }
  m.neighbor_line_r = neighbor_lines;
  const double cpl_conductance = op.v_dc != 0.0 ? op.p_cpl / (op.v_dc * op.v_dc) : 0.0;
  m.a_ii << -spec.r_t / spec.l_t, -gain / spec.l_t,
      gain / spec.c_t, -(line_conductance - cpl_conductance) / spec.c_t;
  if (spec.kind == ConverterKind::Boost) {
    m.b << op.v_dc / spec.l_t, -op.i_dc / spec.c_t;
  } else {
    m.b << 1.0 / spec.l_t, 0.0;
  }
  m.e << 0.0, -1.0 / spec.c_t;
  return m;
}

bool ThetaBox::contains(const Vec3& theta, double tol) const {
  for (int k = 0; k < 3; ++k) {
    if (theta(k) < lo(k) - tol || theta(k) > hi(k) + tol) {
      return false;
    }
  }
  return true;
}

Vec3 ThetaBox::vertex(int index) const {
  Vec3 v;
  for (int k = 0; k < 3; ++k) {
    v(k) = ((index >> k) & 1) != 0 ? hi(k) : lo(k);
  }
  return v;
}

double ThetaBox::max_l1() const {
  double s = 0.0;
  for (int k = 0; k < 3; ++k) {
    s += std::max(std::abs(lo(k)), std::abs(hi(k)));
  }
  return s;
}

AugmentedPlant augment_with_integrator(const DguModel& model, const ThetaBox& uncertainty) {
  AugmentedPlant p;
  p.a_bar.setZero();
  p.a_bar.topLeftCorner<2, 2>() = model.a_ii;
  p.a_bar.block<1, 2>(2, 0) = -model.c;
  p.b_bar << model.b, 0.0;
  p.e_bar << model.e, 0.0;
  p.c_bar << model.c, 0.0;
  p.f << 0.0, 0.0, 1.0;
  p.theta_set = uncertainty;
  return p;
}

double cpl_incremental_resistance(double p_load, double i_bus) {
  if (i_bus == 0.0) {
    throw DomainError("CPL incremental resistance undefined at zero bus current");
  }
  return -p_load / (i_bus * i_bus);
}

void BusNetwork::validate() const {
  require(!dgus.empty(), "bus network needs at least one DGU");
  require(ops.empty() || ops.size() == dgus.size(), "operating point count must match DGU count");
  for (const auto& d : dgus) {
    require(d.r_line > 0.0, "DGU line resistance must be > 0");
  }
  for (const auto& l : loads) {
    require(l.line_r > 0.0, "load line resistance must be > 0 (load '" + l.name + "')");
  }
}

namespace {

struct BusSums {
  double conductance = 0.0;  // sum 1/R_i
  double weighted = 0.0;     // sum v_i/R_i
};

BusSums bus_sums(std::span<const double> v_dc, std::span<const double> r) {
  require(v_dc.size() == r.size(), "v_dc and R must have equal length");
  BusSums s;
  for (std::size_t i = 0; i < r.size(); ++i) {
    require(r[i] > 0.0, "line resistance must be > 0");
    s.conductance += 1.0 / r[i];
    s.weighted += v_dc[i] / r[i];
  }
  require(s.conductance > 0.0, "sum of line conductances must be > 0");
  return s;
}

std::vector<double> dgu_voltages(const BusNetwork& net) {
  std::vector<double> v(net.dgus.size(), net.v_nominal);
  for (std::size_t i = 0; i < net.ops.size(); ++i) {
    v[i] = net.ops[i].v_dc;
  }
  return v;
}

std::vector<double> dgu_lines(const BusNetwork& net) {
  std::vector<double> r;
  r.reserve(net.dgus.size());
  for (const auto& d : net.dgus) {
    r.push_back(d.r_line);
  }
  return r;
}

struct LoadTotals {
  double p_cpl = 0.0;
  double i_linear = 0.0;
};

LoadTotals load_totals(const BusNetwork& net) {
  LoadTotals t;
  for (const auto& l : net.loads) {
    if (l.kind == LoadKind::ConstantPower) {
      t.p_cpl += l.power;
    } else {
      t.i_linear += l.power / net.v_nominal;
    }
  }
  return t;
}

}  // namespace

double solve_bus_voltage(std::span<const double> v_dc, std::span<const double> r, double p_total,
                         double i_sink) {
  const BusSums s = bus_sums(v_dc, r);
  const double sv = s.weighted - i_sink;
  const double disc = sv * sv + 4.0 * p_total * s.conductance;
  if (disc < 0.0) {
    std::ostringstream os;
    os << "bus voltage infeasible: discriminant " << disc << " < 0";
    throw InfeasibleError(os.str());
  }
  const double root = std::sqrt(disc);
  // Stable evaluation of both roots of G v^2 - S v - P = 0.
  const double q = 0.5 * (sv + (sv >= 0.0 ? root : -root));
  double r1 = q / s.conductance;
  double r2 = q != 0.0 ? -p_total / q : r1;
  const double mean = std::accumulate(v_dc.begin(), v_dc.end(), 0.0) / static_cast<double>(v_dc.size());
  return std::abs(r1 - mean) <= std::abs(r2 - mean) ? r1 : r2;
}

double bus_voltage_residual(std::span<const double> v_dc, std::span<const double> r, double p_total,
                            double v, double i_sink) {
  const BusSums s = bus_sums(v_dc, r);
  return s.conductance * v * v - (s.weighted - i_sink) * v - p_total;
}

KronResult kron_reduce(const BusNetwork& net) {
  net.validate();
  require(net.topology == Topology::BusConnected, "kron_reduce expects a bus-connected network");
  const std::size_t n = net.dgus.size();
  const auto v = dgu_voltages(net);
  const auto r = dgu_lines(net);
  double g = 0.0;
  for (double ri : r) {
    g += 1.0 / ri;
  }

  KronResult out;
  out.r_ij = MatX::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) {
        out.r_ij(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r[i] * r[j] * g;
      }
    }
  }
  const LoadTotals totals = load_totals(net);
  out.v_bus = solve_bus_voltage(v, r, -totals.p_cpl, totals.i_linear);
  const double i_cpl_total = totals.p_cpl != 0.0 ? totals.p_cpl / out.v_bus : 0.0;
  out.i_bus_total = i_cpl_total + totals.i_linear;
  out.i_load.resize(n);
  out.i_cpl.resize(n);
  out.p_cpl.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double share = (1.0 / r[i]) / g;
    out.i_load[i] = share * out.i_bus_total;
    out.i_cpl[i] = share * i_cpl_total;
    out.p_cpl[i] = out.i_cpl[i] * v[i];
  }
  return out;
}

std::vector<double> reduced_dgu_currents(const BusNetwork& net, const KronResult& kron) {
  const std::size_t n = net.dgus.size();
  const auto v = dgu_voltages(net);
  std::vector<double> i_out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = kron.i_load[i];
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) {
        acc += (v[i] - v[j]) / kron.r_ij(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
    }
    i_out[i] = acc;
  }
  return i_out;
}

std::vector<double> nodal_dgu_currents(const BusNetwork& net, double* v_bus_out) {
  net.validate();
  const auto v = dgu_voltages(net);
  const auto r = dgu_lines(net);
  const LoadTotals totals = load_totals(net);
  double g = 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    g += 1.0 / r[i];
    s += v[i] / r[i];
  }
  // KCL at the bus: sum (v_i - vb)/R_i - P/vb - I_lin = 0, Newton from the
  // unloaded bus voltage.
  double vb = s / g;
  for (int it = 0; it < 100; ++it) {
    const double f = s - g * vb - totals.p_cpl / vb - totals.i_linear;
    const double df = -g + totals.p_cpl / (vb * vb);
    const double step = f / df;
    vb -= step;
    if (std::abs(step) <= 1e-15 * std::abs(vb)) {
      break;
    }
  }
  if (v_bus_out != nullptr) {
    *v_bus_out = vb;
  }
  std::vector<double> i_out(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    i_out[i] = (v[i] - vb) / r[i];
  }
  return i_out;
}

double effective_cpl_power(const BusNetwork& net, std::size_t index, double r_cpl_bound) {
  net.validate();
  require(index < net.dgus.size(), "DGU index out of range");
  double p_total = 0.0;
  double load_conductance = 0.0;
  for (const auto& l : net.loads) {
    if (l.kind == LoadKind::ConstantPower) {
      p_total += l.power;
      load_conductance += 1.0 / l.line_r;
    }
  }
  if (p_total == 0.0) {
    return 0.0;
  }
  const auto v = dgu_voltages(net);
  double g = 0.0;
  for (const auto& d : net.dgus) {
    g += 1.0 / d.r_line;
  }
  require(r_cpl_bound != 0.0, "R_CPL bound must be non-zero");
  const double inv_rcpl = std::isinf(r_cpl_bound) ? 0.0 : 1.0 / r_cpl_bound;

  // Current-divider weighting of each load, R_k * sum_q 1/R_q, applied per load.
  double divided = 0.0;
  for (const auto& l : net.loads) {
    if (l.kind == LoadKind::ConstantPower) {
      divided += l.power / (l.line_r * load_conductance);
    }
  }
  require(v[index] != 0.0, "DGU voltage must be non-zero");
  double others = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (j != index) {
      others += v[j];
    }
  }
  const double denom = (1.0 / net.dgus[index].r_line) * (1.0 + others / v[index]);
  require(denom != 0.0, "effective CPL power denominator is zero");
  return (inv_rcpl + g) * divided / denom;
}

}  // namespace mgsim::netmodel

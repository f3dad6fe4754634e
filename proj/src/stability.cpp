#include "mgsim/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "mgsim/parallel.hpp"

namespace mgsim::stability {

using netmodel::AugmentedPlant;
using netmodel::ConverterKind;
using netmodel::ConverterSpec;
using netmodel::OperatingPoint;

RationalTf RationalTf::from_poly(const Poly& num_in, const Poly& den_in) {
  const Poly den = poly_trim(den_in);
  Poly num = poly_trim(num_in);
  if (den.size() == 1 && den[0] == 0.0) {
    throw DomainError("zero denominator");
  }
  const std::size_t n = den.size() - 1;
  if (num.size() > den.size()) {
    throw DomainError("improper transfer function");
  }
  const double lead = den[0];
  RationalTf tf;
  tf.d = num.size() == den.size() ? num[0] / lead : 0.0;
  // Strictly proper remainder, highest power first, length n.
  Poly rem(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t deg = n - 1 - i;
    const double nc = deg < num.size() ? num[num.size() - 1 - deg] : 0.0;
    const double dc = den[den.size() - 1 - deg];
    rem[i] = nc / lead - tf.d * dc / lead;
  }
  const auto ni = static_cast<Eigen::Index>(n);
  tf.a = MatX::Zero(ni, ni);
  tf.b = VecX::Zero(ni);
  tf.c = RowVecX::Zero(ni);
  for (Eigen::Index i = 0; i + 1 < ni; ++i) {
    tf.a(i, i + 1) = 1.0;
  }
  for (Eigen::Index j = 0; j < ni; ++j) {
    // coefficient of s^j
    tf.a(ni - 1, j) = -den[den.size() - 1 - static_cast<std::size_t>(j)] / lead;
    tf.c(j) = rem[n - 1 - static_cast<std::size_t>(j)];
  }
  if (ni > 0) {
    tf.b(ni - 1) = 1.0;
  }
  return tf;
}

RationalTf RationalTf::state_space(const MatX& a, const VecX& b, const RowVecX& c, double d) {
  if (a.rows() != a.cols() || b.size() != a.rows() || c.size() != a.rows()) {
    throw DomainError("state-space dimensions do not agree");
  }
  RationalTf tf;
  tf.a = a;
  tf.b = b;
  tf.c = c;
  tf.d = d;
  return tf;
}

Complex RationalTf::evaluate(Complex s) const {
  if (order() == 0) {
    return {d, 0.0};
  }
  const Eigen::Index n = a.rows();
  const Eigen::MatrixXcd m = s * Eigen::MatrixXcd::Identity(n, n) - a.cast<Complex>();
  const Eigen::VectorXcd x = m.partialPivLu().solve(b.cast<Complex>());
  return (c.cast<Complex>() * x)(0) + d;
}

std::vector<Complex> RationalTf::poles() const { return eigenvalues(a); }

bool RationalTf::is_stable() const { return order() == 0 || max_real_eig(a) < 0.0; }

int RationalTf::relative_degree() const {
  if (d != 0.0) {
    return 0;
  }
  VecX v = b;
  const double scale = std::max(1.0, a.norm());
  double mag = c.norm() * b.norm();
  for (int k = 1; k <= order(); ++k) {
    if (std::abs(c.dot(v)) > 1e-12 * mag) {
      return k;
    }
    v = a * v;
    mag *= scale;
  }
  return -1;
}

RationalTf series(const RationalTf& g1, const RationalTf& g2) {
  const Eigen::Index n1 = g1.a.rows();
  const Eigen::Index n2 = g2.a.rows();
  RationalTf g;
  g.a = MatX::Zero(n1 + n2, n1 + n2);
  g.a.topLeftCorner(n1, n1) = g1.a;
  g.a.bottomRightCorner(n2, n2) = g2.a;
  g.a.bottomLeftCorner(n2, n1) = g2.b * g1.c;
  g.b = VecX(n1 + n2);
  g.b << g1.b, g2.b * g1.d;
  g.c = RowVecX(n1 + n2);
  g.c << g2.d * g1.c, g2.c;
  g.d = g2.d * g1.d;
  return g;
}

RationalTf sum(const RationalTf& g1, const RationalTf& g2) {
  const Eigen::Index n1 = g1.a.rows();
  const Eigen::Index n2 = g2.a.rows();
  RationalTf g;
  g.a = MatX::Zero(n1 + n2, n1 + n2);
  g.a.topLeftCorner(n1, n1) = g1.a;
  g.a.bottomRightCorner(n2, n2) = g2.a;
  g.b = VecX(n1 + n2);
  g.b << g1.b, g2.b;
  g.c = RowVecX(n1 + n2);
  g.c << g1.c, g2.c;
  g.d = g1.d + g2.d;
  return g;
}

RationalTf scale(const RationalTf& g, double k) {
  RationalTf out = g;
  out.c *= k;
  out.d *= k;
  return out;
}

namespace {

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

// Root of g(tau) = c e^{A tau} x on (0, dt) given opposite signs at the ends
// (Illinois false position).
double bracket_root(const MatX& a, const VecX& x, const RowVecX& c, double dt, double g0, double g1) {
  double lo = 0.0;
  double hi = dt;
  double flo = g0;
  double fhi = g1;
  int side = 0;
  double mid = 0.5 * dt;
  for (int it = 0; it < 100; ++it) {
    mid = (lo * fhi - hi * flo) / (fhi - flo);
    if (!(mid > lo && mid < hi)) {
      mid = 0.5 * (lo + hi);
    }
    const double fm = c.dot(expm(a * mid) * x);
    if (fm == 0.0 || hi - lo < 1e-15 * dt) {
      break;
    }
    if (sign_of(fm) == sign_of(flo)) {
      lo = mid;
      flo = fm;
      if (side == -1) {
        fhi *= 0.5;
      }
      side = -1;
    } else {
      hi = mid;
      fhi = fm;
      if (side == 1) {
        flo *= 0.5;
      }
      side = 1;
    }
  }
  return mid;
}

}  // namespace

double l1_norm(const RationalTf& tf) {
  double total = std::abs(tf.d);
  const Eigen::Index n = tf.a.rows();
  if (n == 0 || tf.c.isZero(0.0) || tf.b.isZero(0.0)) {
    return total;
  }
  if (!tf.is_stable()) {
    throw DomainError("L1 norm requires a strictly stable transfer function");
  }
  const MatX& a = tf.a;
  const RowVecX& c = tf.c;

  // Modal weights bound each mode's contribution to |h| and set the step.
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(a.cast<Complex>());
  const Eigen::VectorXcd lam = es.eigenvalues();
  const Eigen::MatrixXcd v = es.eigenvectors();
  Eigen::FullPivLU<Eigen::MatrixXcd> vlu(v);
  std::vector<double> weight(static_cast<std::size_t>(n));
  const Eigen::VectorXcd beta = vlu.solve(tf.b.cast<Complex>());
  const Eigen::RowVectorXcd gam = c.cast<Complex>() * v;
  const double vcond = vlu.rcond() > 0.0 ? 1.0 / vlu.rcond() : std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < n; ++k) {
    double w = std::abs(gam(k) * beta(k));
    if (!std::isfinite(w) || vcond > 1e8) {
      w = c.norm() * tf.b.norm() * std::min(vcond, 1e12);
    }
    weight[static_cast<std::size_t>(k)] = w;
  }

  const MatX ainv = a.partialPivLu().inverse();
  auto piece = [&](const VecX& from, const VecX& to) { return std::abs(c.dot(ainv * (to - from))); };

  std::map<double, MatX> phi_cache;
  double t = 0.0;
  VecX x = tf.b;
  VecX xs = x;  // start of the current sign-constant piece
  double acc = 0.0;
  double hprev = c.dot(x);
  int last_sign = sign_of(hprev);
  constexpr long kMaxSteps = 20'000'000;
  for (long step = 0;; ++step) {
    if (step > kMaxSteps) {
      throw NumericalAbort("L1 norm integration did not converge");
    }
    const double est = acc + piece(xs, x);
    double tail = 0.0;
    double fastest = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      const double re = lam(k).real();
      const double contrib = weight[static_cast<std::size_t>(k)] * std::exp(re * t) / std::abs(re);
      tail += contrib;
      if (est == 0.0 || contrib >= 1e-13 * est) {
        fastest = std::max(fastest, std::abs(lam(k)));
      }
    }
    if ((est > 0.0 && tail < 1e-10 * est) || tail < 1e-300 || fastest == 0.0) {
      break;
    }
    // Quantize the step to powers of two so the propagator cache stays small.
    const double dt = std::exp2(std::floor(std::log2(0.05 / fastest)));
    auto it = phi_cache.find(dt);
    if (it == phi_cache.end()) {
      it = phi_cache.emplace(dt, expm(a * dt)).first;
    }
    const VecX xn = it->second * x;
    const double hn = c.dot(xn);
    const int sn = sign_of(hn);
    if (sn == 0) {
      acc += piece(xs, xn);
      xs = xn;
    } else if (last_sign != 0 && sn != last_sign) {
      if (hprev != 0.0) {
        const double tau = bracket_root(a, x, c, dt, hprev, hn);
        const VecX xr = expm(a * tau) * x;
        acc += piece(xs, xr);
        xs = xr;
      }
      last_sign = sn;
    } else if (last_sign == 0) {
      last_sign = sn;
    }
    x = xn;
    hprev = hn;
    t += dt;
  }
  acc += std::abs(c.dot(ainv * xs));
  return total + acc;
}

RationalTf filter_tf(const l1ac::FilterSpec& filter) {
  return RationalTf::from_poly(filter.numerator(), filter.denominator());
}

namespace {

RationalTf complementary_tf(const l1ac::FilterSpec& filter) {
  // C(s) - 1
  return RationalTf::from_poly(poly_add(filter.numerator(), poly_scale(filter.denominator(), -1.0)),
                               filter.denominator());
}

}  // namespace

double lambda_condition(const Mat3& a_m, const Vec3& b_bar, const l1ac::FilterSpec& filter, double theta_max) {
  if (!is_hurwitz(a_m)) {
    throw DomainError("A_m is not Hurwitz");
  }
  if (theta_max == 0.0) {
    return 0.0;
  }
  const RationalTf comp = complementary_tf(filter);
  double norm = 0.0;
  for (int k = 0; k < 3; ++k) {
    RowVecX ck = RowVecX::Zero(3);
    ck(k) = 1.0;
    const RationalTf row = RationalTf::state_space(a_m, b_bar, ck);
    norm += l1_norm(series(row, comp));
  }
  return norm * theta_max;
}

namespace {

SweepResult finish_sweep(std::vector<SweepPoint> pts) {
  SweepResult r;
  r.points = std::move(pts);
  r.monotone_decreasing = true;
  for (std::size_t i = 1; i < r.points.size(); ++i) {
    if (r.points[i].lambda > r.points[i - 1].lambda) {
      r.monotone_decreasing = false;
    }
  }
  return r;
}

}  // namespace

SweepResult sweep_filter_bandwidth_serial(const Mat3& a_m, const Vec3& b_bar, double theta_max,
                                          const std::vector<double>& grid) {
  std::vector<SweepPoint> pts(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    pts[i] = {grid[i], lambda_condition(a_m, b_bar, l1ac::FilterSpec{grid[i]}, theta_max)};
  }
  return finish_sweep(std::move(pts));
}

SweepResult sweep_filter_bandwidth(const Mat3& a_m, const Vec3& b_bar, double theta_max,
                                   const std::vector<double>& grid) {
  if (!is_hurwitz(a_m)) {
    throw DomainError("A_m is not Hurwitz");
  }
  std::vector<SweepPoint> pts(grid.size());
  const auto count = static_cast<long>(grid.size());
#pragma omp parallel for schedule(dynamic) num_threads(thread_count())
  for (long i = 0; i < count; ++i) {
    const auto k = static_cast<std::size_t>(i);
    pts[k] = {grid[k], lambda_condition(a_m, b_bar, l1ac::FilterSpec{grid[k]}, theta_max)};
  }
  return finish_sweep(std::move(pts));
}

std::vector<double> log_grid(double lo, double hi, int points) {
  if (points < 1 || lo <= 0.0 || hi < lo) {
    throw DomainError("log grid needs points >= 1 and 0 < lo <= hi");
  }
  std::vector<double> g(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    const double f = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
    g[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, f);
  }
  return g;
}

std::vector<double> linear_grid(double lo, double hi, int points) {
  if (points < 1 || hi < lo) {
    throw DomainError("linear grid needs points >= 1 and lo <= hi");
  }
  std::vector<double> g(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    g[static_cast<std::size_t>(i)] = points == 1 ? lo : lo + (hi - lo) * i / (points - 1);
  }
  return g;
}

AugmentedPlant plant_at(const ConverterSpec& spec, const OperatingPoint& op, double p_cpl, double line_g) {
  OperatingPoint o = op;
  o.p_cpl = p_cpl;
  std::map<int, double> lines;
  if (line_g > 0.0) {
    lines.emplace(0, 1.0 / line_g);
  }
  return netmodel::augment_with_integrator(netmodel::build_dgu_model(spec, o, lines), {});
}

UncertaintyBound uncertainty_bound(const ConverterSpec& spec, const OperatingPoint& op, const PlantRanges& ranges,
                                   const l1ac::ControllerGains& gains, const Mat3& a_m) {
  const auto ev = eigenvalues(a_m);
  const std::array<Complex, 3> poles{ev[0], ev[1], ev[2]};
  UncertaintyBound ub;
  double worst = -1.0;
  for (double p : {ranges.p_cpl_lo, ranges.p_cpl_hi}) {
    for (double g : {ranges.line_g_lo, ranges.line_g_hi}) {
      const AugmentedPlant plant = plant_at(spec, op, p, g);
      const Vec3 theta = (l1ac::place_poles(plant, poles).k - gains.k).transpose();
      ub.vertex_theta.push_back(theta);
      const double l1 = theta.lpNorm<1>();
      if (l1 > worst) {
        worst = l1;
        ub.theta_star_worst = theta;
      }
    }
  }
  ub.theta_max = 4.0 * worst * worst;
  return ub;
}

double theta_max_from_box(const netmodel::ThetaBox& box) {
  const double m = box.max_l1();
  return 4.0 * m * m;
}

std::vector<RationalTf> h1_tf(const l1ac::DesiredDynamics& dd, const l1ac::FilterSpec& filter) {
  // c0^T (sI - A)^{-1} B = N(s) / det(sI - A), N = charpoly(A - B c0^T) - charpoly(A).
  const Poly den = char_poly(dd.a_m);
  const Poly n_full = poly_add(char_poly(dd.a_m - dd.b_m * dd.c0.transpose()), poly_scale(den, -1.0));
  double sc = 0.0;
  for (double c : n_full) {
    sc = std::max(sc, std::abs(c));
  }
  const Poly n = poly_trim(n_full, 1e-12 * sc);
  const Poly num = poly_mul(filter.numerator(), den);
  const Poly dnm = poly_mul(filter.denominator(), n);
  const RationalTf base = RationalTf::from_poly(num, dnm);
  std::vector<RationalTf> out;
  for (int k = 0; k < 3; ++k) {
    out.push_back(scale(base, dd.c0(k)));
  }
  return out;
}

PerformanceBounds performance_bounds(double v0, double gamma, const l1ac::DesiredDynamics& dd, double theta_max,
                                     const l1ac::FilterSpec& filter) {
  if (gamma <= 0.0) {
    throw DomainError("adaptation gain must be > 0");
  }
  PerformanceBounds pb;
  pb.lambda = lambda_condition(dd.a_m, dd.b_m, filter, theta_max);
  if (pb.lambda >= 1.0) {
    throw InfeasibleError("lambda = " + std::to_string(pb.lambda) + " >= 1; performance bounds are unbounded");
  }
  const double lmin_p = min_eig_sym(dd.p);
  pb.alpha = min_eig_sym(dd.q) / max_eig_sym(dd.p);
  pb.rho_0 = std::sqrt(v0 / lmin_p);
  // t = 0: the exponential factor is 1, leaving Gamma V0 / lambda_min(P).
  const double root =
      std::sqrt(std::max(0.0, (gamma * v0 - theta_max) / lmin_p + theta_max / lmin_p));
  pb.c_norm = l1_norm(filter_tf(filter));
  pb.h1_norm = 0.0;
  for (const auto& h : h1_tf(dd, filter)) {
    pb.h1_norm += l1_norm(h);
  }
  pb.gamma1 = pb.c_norm / (1.0 - pb.lambda) * root;
  pb.gamma2 = pb.h1_norm * root + pb.c_norm * theta_max * pb.gamma1;
  pb.state_bound = pb.gamma1 / std::sqrt(gamma);
  pb.control_bound = pb.gamma2 / std::sqrt(gamma);
  return pb;
}

namespace {

MatX assemble_global(const std::vector<l1ac::DesiredDynamics>& locals, const std::vector<CouplingBlock>& coupling,
                     double kappa, MatX* local_part, MatX* coupling_part, MatX* p_out) {
  const auto n = static_cast<Eigen::Index>(locals.size());
  MatX am = MatX::Zero(3 * n, 3 * n);
  MatX ac = MatX::Zero(3 * n, 3 * n);
  MatX p = MatX::Zero(3 * n, 3 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    am.block<3, 3>(3 * i, 3 * i) = locals[static_cast<std::size_t>(i)].a_m;
    p.block<3, 3>(3 * i, 3 * i) = locals[static_cast<std::size_t>(i)].p;
  }
  for (const auto& cb : coupling) {
    if (cb.i < 0 || cb.j < 0 || cb.i >= n || cb.j >= n || cb.i == cb.j) {
      throw DomainError("coupling block index out of range");
    }
    ac.block<2, 2>(3 * cb.i, 3 * cb.j) += kappa * cb.a_ij;
  }
  if (local_part != nullptr) {
    *local_part = am;
  }
  if (coupling_part != nullptr) {
    *coupling_part = ac;
  }
  if (p_out != nullptr) {
    *p_out = p;
  }
  return am + ac;
}

double spectral_norm(const MatX& m) {
  Eigen::JacobiSVD<MatX> svd(m);
  return svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
}

}  // namespace

GlobalReport global_stability_check(const std::vector<l1ac::DesiredDynamics>& locals,
                                    const std::vector<CouplingBlock>& coupling, double kappa) {
  for (const auto& l : locals) {
    if (!is_hurwitz(l.a_m)) {
      throw DomainError("local desired dynamics are not Hurwitz");
    }
  }
  MatX am;
  MatX ac;
  MatX p;
  const MatX tot = assemble_global(locals, coupling, kappa, &am, &ac, &p);
  GlobalReport r;
  const MatX lyap = tot.transpose() * p + p * tot;
  r.max_eig = max_eig_sym(lyap);
  r.pass = r.max_eig < 0.0;
  r.norm_local = spectral_norm(am.transpose() * p + p * am);
  r.norm_coupling = spectral_norm(ac.transpose() * p + p * ac);
  return r;
}

double critical_coupling_scale(const std::vector<l1ac::DesiredDynamics>& locals,
                               const std::vector<CouplingBlock>& coupling, double kappa_hi) {
  if (global_stability_check(locals, coupling, kappa_hi).pass) {
    return kappa_hi;
  }
  double lo = 0.0;
  double hi = kappa_hi;
  for (int it = 0; it < 200 && hi - lo > 1e-10 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (global_stability_check(locals, coupling, mid).pass) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

namespace {

double load_bandwidth(const LoadStage& load) {
  return load.spec.pi_bandwidth > 0.0 ? load.spec.pi_bandwidth : load.spec.switching_freq / 10.0;
}

Complex load_shunt(const LoadStage& load, Complex s) {
  const double r = load.spec.v_out * load.spec.v_out / load.power;
  const Complex zc = 1.0 / (s * load.spec.c_t);
  return r * zc / (r + zc);
}

}  // namespace

Complex load_z_n(const LoadStage& load) { return {-load.v_in * load.v_in / load.power, 0.0}; }

Complex load_z_d(const LoadStage& load, double omega) {
  const Complex s(0.0, omega);
  const double d = load.spec.v_out / load.v_in;
  return (load.spec.r_t + s * load.spec.l_t + load_shunt(load, s)) / (d * d);
}

Complex load_loop_gain(const LoadStage& load, double omega) {
  const Complex s(0.0, omega);
  const Complex shunt = load_shunt(load, s);
  const Complex plant = load.v_in * shunt / (load.spec.r_t + s * load.spec.l_t + shunt);
  // PI with integral gain wb / V_in and its zero at wb / 4
  const double wb = load_bandwidth(load);
  const Complex pi = (wb / load.v_in) * (1.0 + s / (0.25 * wb)) / s;
  return pi * plant;
}

AdmittanceResult input_admittance(const std::vector<LoadStage>& loads, const std::vector<double>& grid) {
  for (const auto& l : loads) {
    if (l.power <= 0.0 || l.v_in <= 0.0 || l.spec.v_out <= 0.0 || l.spec.v_out > l.v_in) {
      throw DomainError("load stage needs P > 0 and 0 < V_out <= V_in");
    }
  }
  AdmittanceResult res;
  std::vector<bool> near;
  for (double w : grid) {
    AdmittancePoint pt;
    pt.omega = w;
    for (const auto& l : loads) {
      const Complex t = load_loop_gain(l, w);
      if (std::abs(1.0 + t) == 0.0) {
        throw DomainError("1 + T vanishes at omega = " + std::to_string(w));
      }
      const Complex zn = load_z_n(l);
      const Complex zd = load_z_d(l, w);
      pt.y_in += t / (1.0 + t) / zn + 1.0 / (zd * (1.0 + t));
      pt.y_zn_only += 1.0 / zn;
      pt.y_zd_only += 1.0 / zd;
    }
    pt.z_in = 1.0 / pt.y_in;
    const Complex zd_total = 1.0 / pt.y_zd_only;
    near.push_back(std::abs(20.0 * std::log10(std::abs(pt.z_in) / std::abs(zd_total))) <= 3.0);
    res.points.push_back(pt);
  }
  std::size_t first = grid.size();
  for (std::size_t i = grid.size(); i-- > 0;) {
    if (!near[i]) {
      break;
    }
    first = i;
  }
  res.crossover = first < grid.size() ? grid[first] : 0.0;
  return res;
}

TwoConverterSystem default_two_converter_system() {
  TwoConverterSystem sys;
  ConverterSpec spec{ConverterKind::Boost, 100.0, 0.1, 2e-3, 2e-3, 0.1};
  sys.dgu1 = spec;
  sys.dgu2 = spec;
  sys.op1 = netmodel::make_operating_point(spec, 382.0, 5.0);
  sys.op2 = sys.op1;
  sys.r12 = 0.1;
  const std::array<Complex, 3> poles{Complex(-20.0, 600.0), Complex(-20.0, -600.0), Complex(-30.0, 0.0)};
  sys.gains1 = l1ac::place_poles(plant_at(sys.dgu1, sys.op1, 0.0, 0.0), poles);
  sys.gains2 = l1ac::place_poles(plant_at(sys.dgu2, sys.op2, 0.0, 0.0), poles);
  return sys;
}

MatX two_converter_closed_loop(const TwoConverterSystem& sys, double r_cpl) {
  const double g_cpl = r_cpl == 0.0 ? 0.0 : 1.0 / r_cpl;
  const double g12 = 1.0 / sys.r12;
  MatX a = MatX::Zero(6, 6);
  const AugmentedPlant p1 = plant_at(sys.dgu1, sys.op1, 0.0, g12);
  const AugmentedPlant p2 = plant_at(sys.dgu2, sys.op2, 0.0, g12);
  a.block<3, 3>(0, 0) = l1ac::closed_loop_matrix(p1, sys.gains1);
  a.block<3, 3>(3, 3) = l1ac::closed_loop_matrix(p2, sys.gains2);
  a(1, 1) -= g_cpl / sys.dgu1.c_t;
  a(4, 4) -= g_cpl / sys.dgu2.c_t;
  a(1, 4) = g12 / sys.dgu1.c_t;
  a(4, 1) = g12 / sys.dgu2.c_t;
  return a;
}

namespace {

LocusPoint locus_point(const TwoConverterSystem& sys, double r) {
  LocusPoint lp;
  lp.r_cpl = r;
  lp.eig = eigenvalues(two_converter_closed_loop(sys, r));
  std::sort(lp.eig.begin(), lp.eig.end(), [](Complex x, Complex y) {
    return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
  });
  return lp;
}

}  // namespace

std::vector<LocusPoint> eigen_locus_serial(const TwoConverterSystem& sys, const std::vector<double>& r_grid) {
  std::vector<LocusPoint> out;
  out.reserve(r_grid.size());
  for (double r : r_grid) {
    out.push_back(locus_point(sys, r));
  }
  return out;
}

std::vector<LocusPoint> eigen_locus(const TwoConverterSystem& sys, const std::vector<double>& r_grid) {
  std::vector<LocusPoint> out(r_grid.size());
  const auto count = static_cast<long>(r_grid.size());
#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (long i = 0; i < count; ++i) {
    out[static_cast<std::size_t>(i)] = locus_point(sys, r_grid[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace mgsim::stability

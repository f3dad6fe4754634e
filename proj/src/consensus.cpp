#include "mgsim/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "mgsim/rk4.hpp"

namespace mgsim::consensus {

CommGraph::CommGraph(int n) : n_(n) {
  if (n < 0) {
    throw DomainError("graph size must be >= 0");
  }
}

CommGraph::CommGraph(int n, const std::vector<std::pair<int, int>>& edges) : CommGraph(n) {
  for (const auto& [i, j] : edges) {
    add_edge(i, j);
  }
}

CommGraph CommGraph::complete(int n) {
  CommGraph g(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      g.add_edge(i, j);
    }
  }
  return g;
}

std::pair<int, int> CommGraph::key(int i, int j) { return {std::min(i, j), std::max(i, j)}; }

bool CommGraph::has_edge(int i, int j) const { return edges_.count(key(i, j)) > 0; }

void CommGraph::add_edge(int i, int j) {
  if (i == j) {
    throw DomainError("self-loop on node " + std::to_string(i));
  }
  if (i < 0 || j < 0 || i >= n_ || j >= n_) {
    throw DomainError("edge (" + std::to_string(i) + "," + std::to_string(j) + ") out of range");
  }
  edges_.insert(key(i, j));
}

bool CommGraph::remove_edge(int i, int j) { return edges_.erase(key(i, j)) > 0; }

int CommGraph::add_node() { return n_++; }

MatX CommGraph::adjacency() const {
  MatX a = MatX::Zero(n_, n_);
  for (const auto& [i, j] : edges_) {
    a(i, j) = 1.0;
    a(j, i) = 1.0;
  }
  return a;
}

MatX CommGraph::laplacian() const {
  const MatX a = adjacency();
  MatX l = -a;
  for (int i = 0; i < n_; ++i) {
    l(i, i) = a.row(i).sum();
  }
  return l;
}

std::vector<std::vector<int>> CommGraph::components() const {
  std::vector<int> parent(static_cast<std::size_t>(n_));
  for (int i = 0; i < n_; ++i) {
    parent[static_cast<std::size_t>(i)] = i;
  }
  std::function<int(int)> find = [&](int x) {
    auto& p = parent[static_cast<std::size_t>(x)];
    return p == x ? x : (p = find(p));
  };
  for (const auto& [i, j] : edges_) {
    parent[static_cast<std::size_t>(find(i))] = find(j);
  }
  std::vector<std::vector<int>> out;
  std::vector<int> slot(static_cast<std::size_t>(n_), -1);
  for (int i = 0; i < n_; ++i) {
    const int r = find(i);
    auto& s = slot[static_cast<std::size_t>(r)];
    if (s < 0) {
      s = static_cast<int>(out.size());
      out.emplace_back();
    }
    out[static_cast<std::size_t>(s)].push_back(i);
  }
  return out;
}

double CommGraph::algebraic_connectivity() const {
  if (n_ < 2) {
    return 0.0;
  }
  Eigen::SelfAdjointEigenSolver<MatX> es(laplacian(), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(1);
}

MatX laplacian(const CommGraph& g) { return g.laplacian(); }

CommGraph case_graph_initial() { return CommGraph(5, {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {3, 4}}); }

CommGraph case_graph_plugged() {
  return CommGraph(6, {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {3, 4}, {0, 5}, {4, 5}});
}

CommGraph case_graph_failed() { return CommGraph(6, {{1, 3}, {2, 3}, {3, 4}, {0, 5}, {4, 5}}); }

SecondaryGains SecondaryGains::uniform(int n, double kp_v, double ki_v, double kp_i, double ki_i) {
  const auto sz = static_cast<std::size_t>(n);
  return {std::vector<double>(sz, kp_v), std::vector<double>(sz, ki_v), std::vector<double>(sz, kp_i),
          std::vector<double>(sz, ki_i), std::vector<double>(sz, 1.0)};
}

void SecondaryGains::validate(int n) const {
  const auto sz = static_cast<std::size_t>(n);
  for (const auto* v : {&kp_v, &ki_v, &kp_i, &ki_i, &m}) {
    if (v->size() != sz) {
      throw DomainError("secondary gain vector has " + std::to_string(v->size()) + " entries, expected " +
                        std::to_string(n));
    }
    for (double x : *v) {
      if (!(x > 0.0) || !std::isfinite(x)) {
        throw DomainError("secondary gains and sharing coefficients must be > 0");
      }
    }
  }
}

SecondaryState SecondaryState::zeros(int n) {
  return {VecX::Zero(n), VecX::Zero(n), VecX::Zero(n), VecX::Zero(n)};
}

VecX voltage_estimate(const SecondaryState& s, const VecX& v_dc) { return v_dc - s.z_v; }

VecX current_estimate(const SecondaryState& s, const VecX& i_out, const SecondaryGains& g) {
  const Eigen::Map<const VecX> m(g.m.data(), static_cast<Eigen::Index>(g.m.size()));
  return i_out.cwiseQuotient(m) - s.z_i;
}

VecX consensus_rate(const MatX& lap, const VecX& z, const VecX& signal) { return lap * (signal - z); }

SecondaryState consensus_voltage_step(const SecondaryState& s, const VecX& v_dc, const CommGraph& g, double dt) {
  const MatX lap = g.laplacian();
  SecondaryState out = s;
  auto f = [&](double, const VecX& z) { return consensus_rate(lap, z, v_dc); };
  out.z_v = sim::rk4_step(f, s.z_v, 0.0, dt);
  return out;
}

SecondaryState consensus_current_step(const SecondaryState& s, const VecX& i_out, const SecondaryGains& gains,
                                      const CommGraph& g, double dt) {
  const MatX lap = g.laplacian();
  const Eigen::Map<const VecX> m(gains.m.data(), static_cast<Eigen::Index>(gains.m.size()));
  const VecX normalized = i_out.cwiseQuotient(m);
  SecondaryState out = s;
  auto f = [&](double, const VecX& z) { return consensus_rate(lap, z, normalized); };
  out.z_i = sim::rk4_step(f, s.z_i, 0.0, dt);
  return out;
}

namespace {

Eigen::Map<const VecX> as_vec(const std::vector<double>& v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

}  // namespace

Corrections pi_corrections(const SecondaryState& s, const SecondaryGains& gains, double v_bus_ref, const VecX& v_dc,
                           [[maybe_unused]] const VecX& i_out) {
  Corrections c;
  c.e_v = VecX::Constant(v_dc.size(), v_bus_ref) - voltage_estimate(s, v_dc);
  c.e_i = -s.z_i;  // i_ref - i_out / m
  c.dv = as_vec(gains.kp_v).cwiseProduct(c.e_v) + as_vec(gains.ki_v).cwiseProduct(s.pi_v);
  c.di = as_vec(gains.kp_i).cwiseProduct(c.e_i) + as_vec(gains.ki_i).cwiseProduct(s.pi_i);
  return c;
}

SecondaryState pi_step(const SecondaryState& s, const SecondaryGains& gains, double v_bus_ref, const VecX& v_dc,
                       const VecX& i_out, double dt) {
  const Corrections c = pi_corrections(s, gains, v_bus_ref, v_dc, i_out);
  SecondaryState out = s;
  out.pi_v = s.pi_v + dt * c.e_v;
  out.pi_i = s.pi_i + dt * c.e_i;
  return out;
}

VecX compose_reference(double v_bus_ref, const VecX& dv, const VecX& di) {
  return VecX::Constant(dv.size(), v_bus_ref) + dv + di;
}

UnitGainPlant UnitGainPlant::uniform(int n, double r_line, double r_load) {
  const auto sz = static_cast<std::size_t>(n);
  return {std::vector<double>(sz, r_line), r_load, std::vector<double>(sz, 0.0)};
}

VecX unit_gain_currents(const UnitGainPlant& plant, const VecX& v) {
  double g_sum = 1.0 / plant.r_load;
  double s = 0.0;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    const double r = plant.r_line[static_cast<std::size_t>(k)];
    g_sum += 1.0 / r;
    s += v(k) / r;
  }
  const double v_bus = s / g_sum;
  VecX i(v.size());
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    i(k) = (v(k) - v_bus) / plant.r_line[static_cast<std::size_t>(k)];
  }
  return i;
}

namespace {

// Stacked secondary state [z_v, z_i, pi_v, pi_i].
VecX pack(const SecondaryState& s) {
  const Eigen::Index n = s.z_v.size();
  VecX x(4 * n);
  x << s.z_v, s.z_i, s.pi_v, s.pi_i;
  return x;
}

SecondaryState unpack(const VecX& x, Eigen::Index n) {
  return {x.segment(0, n), x.segment(n, n), x.segment(2 * n, n), x.segment(3 * n, n)};
}

// Node voltages of the identity-primary loop: V = V_ref(V) + d solved per node.
VecX unit_gain_voltages(const SecondaryState& s, const SecondaryGains& g, double v_ref, const UnitGainPlant& plant) {
  const Eigen::Index n = s.z_v.size();
  VecX v(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto u = static_cast<std::size_t>(k);
    const double di = g.kp_i[u] * (-s.z_i(k)) + g.ki_i[u] * s.pi_i(k);
    v(k) = (v_ref + g.kp_v[u] * (v_ref + s.z_v(k)) + g.ki_v[u] * s.pi_v(k) + di + plant.disturbance[u]) /
           (1.0 + g.kp_v[u]);
  }
  return v;
}

}  // namespace

UnitGainTrace unit_gain_closed_loop(const SecondaryGains& gains, const CommGraph& g, double v_bus_ref, double horizon,
                                    const UnitGainPlant& plant, double dt, const SecondaryState* initial) {
  const int n = g.size();
  gains.validate(n);
  if (static_cast<int>(plant.r_line.size()) != n || static_cast<int>(plant.disturbance.size()) != n) {
    throw DomainError("unit-gain plant size does not match the graph");
  }
  if (!(dt > 0.0) || horizon < 0.0) {
    throw DomainError("unit-gain loop needs dt > 0 and horizon >= 0");
  }
  const MatX lap = g.laplacian();
  const Eigen::Map<const VecX> m(gains.m.data(), n);
  auto rhs = [&](double, const VecX& x) {
    const SecondaryState s = unpack(x, n);
    const VecX v = unit_gain_voltages(s, gains, v_bus_ref, plant);
    const VecX i = unit_gain_currents(plant, v);
    const Corrections c = pi_corrections(s, gains, v_bus_ref, v, i);
    VecX d(4 * n);
    d << consensus_rate(lap, s.z_v, v), consensus_rate(lap, s.z_i, i.cwiseQuotient(m)), c.e_v, c.e_i;
    return d;
  };
  UnitGainTrace tr;
  VecX x = pack(initial != nullptr ? *initial : SecondaryState::zeros(n));
  const long steps = std::lround(horizon / dt);
  for (long k = 0; k <= steps; ++k) {
    const SecondaryState s = unpack(x, n);
    const VecX v = unit_gain_voltages(s, gains, v_bus_ref, plant);
    const VecX i = unit_gain_currents(plant, v);
    const Corrections c = pi_corrections(s, gains, v_bus_ref, v, i);
    tr.t.push_back(static_cast<double>(k) * dt);
    tr.v.push_back(v);
    tr.i.push_back(i);
    tr.e_v.push_back(c.e_v);
    tr.e_i.push_back(c.e_i);
    tr.state.push_back(s);
    if (k < steps) {
      x = sim::rk4_step(rhs, x, static_cast<double>(k) * dt, dt);
    }
  }
  return tr;
}

namespace {

bool eventually_nonincreasing(const std::vector<double>& v, double tail_fraction) {
  if (v.empty()) {
    return true;
  }
  const auto start = static_cast<std::size_t>(std::floor((1.0 - tail_fraction) * static_cast<double>(v.size())));
  const double peak = *std::max_element(v.begin(), v.end());
  for (std::size_t k = std::max<std::size_t>(start, 1); k < v.size(); ++k) {
    if (v[k] > v[k - 1] + 1e-12 * std::max(peak, 1e-300)) {
      return false;
    }
  }
  return true;
}

}  // namespace

SecondaryLyapunovReport secondary_lyapunov_check(const CommGraph& g, const UnitGainTrace& trace, double tail_fraction,
                                                 double zero_tol) {
  SecondaryLyapunovReport r;
  for (std::size_t k = 0; k < trace.t.size(); ++k) {
    r.v_i.push_back(0.5 * trace.e_i[k].squaredNorm());
    r.v_v.push_back(0.5 * trace.e_v[k].squaredNorm());
  }
  r.v_i_eventually_nonincreasing = eventually_nonincreasing(r.v_i, tail_fraction);
  r.v_v_eventually_nonincreasing = eventually_nonincreasing(r.v_v, tail_fraction);
  r.v_i_to_zero = r.v_i.empty() || r.v_i.back() < zero_tol;
  r.v_v_to_zero = r.v_v.empty() || r.v_v.back() < zero_tol;
  if (g.size() > 0) {
    Eigen::SelfAdjointEigenSolver<MatX> es(g.laplacian(), Eigen::EigenvaluesOnly);
    r.min_laplacian_eig = es.eigenvalues()(0);
    r.algebraic_connectivity = g.size() > 1 ? es.eigenvalues()(1) : 0.0;
  }
  r.laplacian_psd = r.min_laplacian_eig >= -1e-12;
  return r;
}

}  // namespace mgsim::consensus

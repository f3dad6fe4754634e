#include "mgsim/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <unsupported/Eigen/MatrixFunctions>

namespace mgsim {

Poly poly_mul(const Poly& a, const Poly& b) {
  if (a.empty() || b.empty()) {
    return {0.0};
  }
  Poly out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      out[i + j] += a[i] * b[j];
    }
  }
  return out;
}

Poly poly_add(const Poly& a, const Poly& b) {
  const std::size_t n = std::max(a.size(), b.size());
  Poly out(n, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[n - a.size() + i] += a[i];
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    out[n - b.size() + i] += b[i];
  }
  return out;
}

Poly poly_scale(const Poly& a, double k) {
  Poly out = a;
  for (auto& c : out) {
    c *= k;
  }
  return out;
}

Complex poly_eval(const Poly& p, Complex s) {
  Complex acc{0.0, 0.0};
  for (double c : p) {
    acc = acc * s + c;
  }
  return acc;
}

Poly poly_trim(const Poly& p, double tol) {
  std::size_t first = 0;
  while (first < p.size() && std::abs(p[first]) <= tol) {
    ++first;
  }
  if (first == p.size()) {
    return {0.0};
  }
  return Poly(p.begin() + static_cast<std::ptrdiff_t>(first), p.end());
}

std::vector<Complex> poly_roots(const Poly& p_in) {
  const Poly p = poly_trim(p_in);
  const std::size_t deg = p.size() - 1;
  if (deg == 0) {
    return {};
  }
  // Companion matrix of the monic polynomial.
  MatX comp = MatX::Zero(static_cast<Eigen::Index>(deg), static_cast<Eigen::Index>(deg));
  for (std::size_t j = 0; j < deg; ++j) {
    comp(0, static_cast<Eigen::Index>(j)) = -p[j + 1] / p[0];
  }
  for (std::size_t i = 1; i < deg; ++i) {
    comp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;
  }
  return eigenvalues(comp);
}

Poly char_poly(const MatX& a) {
  // Faddeev-LeVerrier; exact enough for the small matrices used here.
  const Eigen::Index n = a.rows();
  Poly coeffs(static_cast<std::size_t>(n) + 1, 0.0);
  coeffs[0] = 1.0;
  MatX m = MatX::Zero(n, n);
  const MatX id = MatX::Identity(n, n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    m = a * m + coeffs[static_cast<std::size_t>(k - 1)] * id;
    coeffs[static_cast<std::size_t>(k)] = -(a * m).trace() / static_cast<double>(k);
  }
  return coeffs;
}

std::vector<Complex> eigenvalues(const MatX& a) {
  if (a.size() == 0) {
    return {};
  }
  Eigen::EigenSolver<MatX> es(a, false);
  std::vector<Complex> out;
  out.reserve(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    out.push_back(es.eigenvalues()(i));
  }
  return out;
}

double max_real_eig(const MatX& a) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& ev : eigenvalues(a)) {
    best = std::max(best, ev.real());
  }
  return best;
}

double min_abs_real_eig(const MatX& a) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& ev : eigenvalues(a)) {
    best = std::min(best, std::abs(ev.real()));
  }
  return best;
}

bool is_hurwitz(const MatX& a, double margin) { return max_real_eig(a) < -margin; }

MatX expm(const MatX& a) { return a.exp(); }

MatX sym(const MatX& a) { return 0.5 * (a + a.transpose()); }

double max_eig_sym(const MatX& a) {
  Eigen::SelfAdjointEigenSolver<MatX> es(sym(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double min_eig_sym(const MatX& a) {
  Eigen::SelfAdjointEigenSolver<MatX> es(sym(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace mgsim

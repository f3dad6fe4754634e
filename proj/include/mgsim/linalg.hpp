#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mgsim {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using RowVec2 = Eigen::RowVector2d;
using RowVec3 = Eigen::RowVector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using RowVecX = Eigen::RowVectorXd;
using MatX = Eigen::MatrixXd;
using Complex = std::complex<double>;

// Raised when an input lies outside the mathematical domain of an operation
// (zero current, zero denominator, non-Hurwitz matrix, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Raised when a well-posed problem has no physical solution (negative
// discriminant, infeasible bound).
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when numerical integration produces a non-finite value.
class NumericalAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Polynomials are stored highest power first: {1, a, b} is s^2 + a s + b.
using Poly = std::vector<double>;

Poly poly_mul(const Poly& a, const Poly& b);
Poly poly_add(const Poly& a, const Poly& b);
Poly poly_scale(const Poly& a, double k);
Complex poly_eval(const Poly& p, Complex s);
// Leading zeros are stripped; the zero polynomial becomes {0}.
Poly poly_trim(const Poly& p, double tol = 0.0);
std::vector<Complex> poly_roots(const Poly& p);

// Characteristic polynomial det(sI - A), monic, highest power first.
Poly char_poly(const MatX& a);

std::vector<Complex> eigenvalues(const MatX& a);
double max_real_eig(const MatX& a);
double min_abs_real_eig(const MatX& a);
bool is_hurwitz(const MatX& a, double margin = 0.0);

MatX expm(const MatX& a);

// Symmetric part (A + A^T)/2.
MatX sym(const MatX& a);
double max_eig_sym(const MatX& a);
double min_eig_sym(const MatX& a);

}  // namespace mgsim

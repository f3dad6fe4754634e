#pragma once

#include <cmath>
#include <sstream>
#include <string>

#include "mgsim/linalg.hpp"

namespace mgsim::sim {

// Index of the first non-finite entry, or -1.
template <typename Vec>
Eigen::Index first_non_finite(const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v(i))) {
      return i;
    }
  }
  return -1;
}

// Classical fourth-order Runge-Kutta step of x' = f(t, x). `f` returns the
// derivative with the same type as `x`. Throws NumericalAbort naming the first
// component whose derivative is not finite.
template <typename Vec, typename F>
Vec rk4_step(F&& f, const Vec& x, double t, double dt) {
  auto checked = [&](double tk, const Vec& xk) {
    Vec d = f(tk, xk);
    if (const auto bad = first_non_finite(d); bad >= 0) {
      std::ostringstream os;
      os << "non-finite derivative in component " << bad << " at t=" << tk;
      throw NumericalAbort(os.str());
    }
    return d;
  };
  const double h = 0.5 * dt;
  const Vec k1 = checked(t, x);
  const Vec k2 = checked(t + h, Vec(x + h * k1));
  const Vec k3 = checked(t + h, Vec(x + h * k2));
  const Vec k4 = checked(t + dt, Vec(x + dt * k3));
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace mgsim::sim

#pragma once

#include <cmath>

#include <Eigen/Core>

namespace testsupport {

// Central differences; h = 1e-5 balances truncation and cancellation for the
// loss magnitudes used in these tests.
template <class F>
Eigen::VectorXd central_diff(F&& f, const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    const double fp = f(xp);
    xp[i] = x[i] - h;
    const double fm = f(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// Relative error above a small magnitude floor, absolute below it.
inline double mixed_err(double got, double want) {
  const double scale = std::max(std::abs(got), std::abs(want));
  if (scale < 1e-8) return std::abs(got - want);
  return std::abs(got - want) / scale;
}

inline double max_mixed_err(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < got.size(); ++i) m = std::max(m, mixed_err(got[i], want[i]));
  return m;
}

}  // namespace testsupport

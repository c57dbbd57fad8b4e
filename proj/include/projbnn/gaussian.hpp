#pragma once

#include <cmath>
#include <numbers>

#include "projbnn/ad.hpp"
#include "projbnn/common.hpp"

namespace projbnn {

inline constexpr double kLogTwoPi = 1.8378770664093454836;

// Sum over components of log N(value_i; mean_i, std_dev^2), shared std_dev.
template <class S>
S gaussian_log_density(const VectorX<S>& value, const VectorX<S>& mean, double std_dev) {
  require(std_dev > 0.0, "gaussian_log_density: std must be positive, got ", std_dev);
  require(value.size() == mean.size(), "gaussian_log_density: value has ", value.size(), " dims, mean has ", mean.size());
  const double n = static_cast<double>(value.size());
  const S quad = squared_diff_norm(value, mean);
  return S(-n * (0.5 * kLogTwoPi + std::log(std_dev))) - quad / (2.0 * std_dev * std_dev);
}

// Isotropic case with a scalar mean, used for priors.
template <class S>
S gaussian_log_density_iso(const VectorX<S>& value, double mean, double std_dev) {
  const VectorX<S> m = VectorX<S>::Constant(value.size(), S(mean));
  return gaussian_log_density(value, m, std_dev);
}

inline double gaussian_log_density(double value, double mean, double std_dev) {
  require(std_dev > 0.0, "gaussian_log_density: std must be positive, got ", std_dev);
  const double t = (value - mean) / std_dev;
  return -0.5 * kLogTwoPi - std::log(std_dev) - 0.5 * t * t;
}

}  // namespace projbnn

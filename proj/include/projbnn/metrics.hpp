#pragma once

#include <cmath>
#include <vector>

#include "projbnn/common.hpp"
#include "projbnn/dataset.hpp"

namespace projbnn {

// log( mean_i exp(v_i) ), max-shifted for stability. The sum uses a recursive
// pairwise reduction so duplicating the value set leaves the result bit-exact.
double logmeanexp(const Eigen::Ref<const VectorXd>& v);

template <class DA, class DB>
double rmse(const Eigen::MatrixBase<DA>& predictions, const Eigen::MatrixBase<DB>& targets) {
  require(predictions.rows() == targets.rows() && predictions.cols() == targets.cols(), "rmse: prediction shape ", predictions.rows(), "x", predictions.cols(), " vs target shape ",
              targets.rows(), "x", targets.cols());
  require(predictions.size() > 0, "rmse of an empty set");
  return std::sqrt((predictions - targets).squaredNorm() / static_cast<double>(predictions.size()));
}

// Posterior predictive draws on a fixed input set: per-sample function values
// and per-sample per-point log-likelihoods.
struct PredictiveSampleSet {
  MatrixXd function_values;  // S x N (single-output models)
  MatrixXd point_loglik;     // S x N
  double sigma_y = 0.0;
};

// mean over points of logmeanexp over samples of the pointwise log-likelihood
double marginal_test_ll(const PredictiveSampleSet& samples);

struct Band {
  VectorXd x;
  VectorXd mean;
  VectorXd q_low;
  VectorXd q_high;
  VectorXd total_std;  // sqrt(sample variance + sigma_y^2)
};

// Empirical quantiles of the sampled functions widened by the observation
// noise quantile, so a point-mass posterior still yields a noise-wide band.
Band predictive_bands(const Eigen::Ref<const VectorXd>& x_grid, const PredictiveSampleSet& samples, double q_low,
                      double q_high);

// Midpoint-interpolated empirical quantile: sorted value i sits at level
// (i + 0.5) / n, clamped at the extremes.
double empirical_quantile(std::vector<double> values, double q);

// Inverse standard normal CDF (Wichura's AS 241, double precision).
double inv_std_normal_cdf(double p);

// Columns x, mean, q_low, q_high, total_std; one row per grid point.
void save_bands_csv(const Band& band, const std::string& path);

// A mode counts as covered when at least one posterior sample fits its rows
// to within `threshold` RMSE.
int mode_coverage(const PredictiveSampleSet& samples, const std::vector<std::vector<int>>& mode_rows,
                  const Eigen::Ref<const VectorXd>& y, double threshold);

}  // namespace projbnn

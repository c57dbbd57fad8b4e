#include "projbnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace projbnn {

namespace {

double pairwise_sum(const double* v, Index n) {
  if (n <= 4) {
    double s = 0.0;
    for (Index i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const Index half = n / 2;
  return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

}  // namespace

double logmeanexp(const Eigen::Ref<const VectorXd>& v) {
  require(v.size() > 0, "logmeanexp of an empty set");
  const double m = v.maxCoeff();
  require(std::isfinite(m), "logmeanexp: non-finite input");
  VectorXd shifted(v.size());
  for (Index i = 0; i < v.size(); ++i) shifted[i] = std::exp(v[i] - m);
  return m + std::log(pairwise_sum(shifted.data(), shifted.size()) / static_cast<double>(v.size()));
}

double marginal_test_ll(const PredictiveSampleSet& samples) {
  const Index s = samples.point_loglik.rows(), n = samples.point_loglik.cols();
  require(s > 0 && n > 0, "marginal_test_ll needs at least one sample and one point");
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < s; ++i)
      if (!std::isfinite(samples.point_loglik(i, j)))
        throw std::invalid_argument(cat("marginal_test_ll: non-finite log-likelihood at point ", j, ", sample ", i));
  double acc = 0.0;
  for (Index j = 0; j < n; ++j) acc += logmeanexp(samples.point_loglik.col(j));
  return acc / static_cast<double>(n);
}

double empirical_quantile(std::vector<double> values, double q) {
  require(!values.empty(), "quantile of an empty set");
  require(q >= 0.0 && q <= 1.0, "quantile level must be in [0,1], got ", q);
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  const double pos = q * n - 0.5;  // inverse of level (i + 0.5) / n
  if (pos <= 0.0) return values.front();
  if (pos >= n - 1.0) return values.back();
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double t = pos - std::floor(pos);
  return values[lo] * (1.0 - t) + values[lo + 1] * t;
}

namespace {

// standard normal quantile, Wichura's PPND16 (AS 241)
double inv_std_normal_cdf_impl(double p) {
  require(p > 0.0 && p < 1.0, "normal quantile needs p in (0,1), got ", p);
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r + 6.7265770927008700853e4) * r +
                4.5921953931549871457e4) *
                   r +
               1.3731693765509461125e4) *
                  r +
              1.9715909503065514427e3) *
                 r +
             1.3314166789178437745e2) *
                r +
            3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r + 3.9307895800092710610e4) * r +
                2.1213794301586595867e4) *
                   r +
               5.3941960214247511077e3) *
                  r +
              6.8718700749205790830e2) *
                 r +
             4.2313330701600911252e1) *
                r +
            1.0);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r + 2.41780725177450611770e-1) * r +
              1.27045825245236838258e0) *
                 r +
             3.64784832476320460504e0) *
                r +
            5.76949722146069140550e0) *
               r +
           4.63033784615654529590e0) *
              r +
          1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r + 1.51986665636164571966e-2) * r +
              1.48103976427480074590e-1) *
                 r +
             6.89767334985100004550e-1) *
                r +
            1.67638483018380384940e0) *
               r +
           2.05319162663775882187e0) *
              r +
          1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 1.24266094738807843860e-3) * r +
              2.65321895265761230930e-2) *
                 r +
             2.96560571828504891230e-1) *
                r +
            1.78482653991729133580e0) *
               r +
           5.46378491116411436990e0) *
              r +
          6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r + 1.84631831751005468180e-5) * r +
              7.86869131145613259100e-4) *
                 r +
             1.48753612908506148525e-2) *
                r +
            1.36929880922735805310e-1) *
               r +
           5.99832206555887937690e-1) *
              r +
          1.0);
  }
  return q < 0.0 ? -val : val;
}

}  // namespace

double inv_std_normal_cdf(double p) { return inv_std_normal_cdf_impl(p); }

Band predictive_bands(const Eigen::Ref<const VectorXd>& x_grid, const PredictiveSampleSet& samples, double q_low,
                      double q_high) {
  const Index s = samples.function_values.rows(), n = samples.function_values.cols();
  require(s > 0 && n > 0, "predictive_bands needs at least one sample and one point");
  require(n == x_grid.size(), "predictive_bands: ", n, " sampled columns vs ", x_grid.size(), " grid points");
  require(q_low < q_high, "predictive_bands: q_low ", q_low, " must be below q_high ", q_high);
  require(samples.sigma_y >= 0.0, "predictive_bands: negative observation noise");

  Band b;
  b.x = x_grid;
  b.mean.resize(n);
  b.q_low.resize(n);
  b.q_high.resize(n);
  b.total_std.resize(n);
  const double noise_lo = samples.sigma_y > 0.0 ? samples.sigma_y * inv_std_normal_cdf(q_low) : 0.0;
  const double noise_hi = samples.sigma_y > 0.0 ? samples.sigma_y * inv_std_normal_cdf(q_high) : 0.0;
  std::vector<double> col(static_cast<std::size_t>(s));
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < s; ++i) col[static_cast<std::size_t>(i)] = samples.function_values(i, j);
    const double mean = samples.function_values.col(j).mean();
    const double var = (samples.function_values.col(j).array() - mean).square().sum() / static_cast<double>(s);
    b.mean[j] = mean;
    b.q_low[j] = empirical_quantile(col, q_low) + noise_lo;
    b.q_high[j] = empirical_quantile(col, q_high) + noise_hi;
    b.total_std[j] = std::sqrt(var + samples.sigma_y * samples.sigma_y);
  }
  return b;
}

void save_bands_csv(const Band& band, const std::string& path) {
  const Index n = band.x.size();
  require(n > 0, "bands are empty");
  require(band.mean.size() == n && band.q_low.size() == n && band.q_high.size() == n && band.total_std.size() == n,
          "band columns disagree on length");
  std::ofstream out(path);
  require(out.good(), "csv: cannot write '", path, "'");
  out << "x,mean,q_low,q_high,total_std\n";
  for (Index r = 0; r < n; ++r) {
    out << format_double(band.x[r]) << "," << format_double(band.mean[r]) << "," << format_double(band.q_low[r])
        << "," << format_double(band.q_high[r]) << "," << format_double(band.total_std[r]) << "\n";
  }
  require(out.good(), "csv: write to '", path, "' failed");
}

int mode_coverage(const PredictiveSampleSet& samples, const std::vector<std::vector<int>>& mode_rows,
                  const Eigen::Ref<const VectorXd>& y, double threshold) {
  require(threshold > 0.0, "mode_coverage: threshold must be positive, got ", threshold);
  const Index s = samples.function_values.rows();
  int covered = 0;
  for (const auto& rows : mode_rows) {
    require(!rows.empty(), "mode_coverage: a mode has no rows");
    bool hit = false;
    for (Index i = 0; i < s && !hit; ++i) {
      double sq = 0.0;
      for (int r : rows) {
        require(r >= 0 && r < y.size(), "mode_coverage: row ", r, " out of range");
        const double d = samples.function_values(i, r) - y[r];
        sq += d * d;
      }
      hit = std::sqrt(sq / static_cast<double>(rows.size())) < threshold;
    }
    covered += hit ? 1 : 0;
  }
  return covered;
}

}  // namespace projbnn

#pragma once

#include <cstdint>

#include "projbnn/gaussian.hpp"
#include "projbnn/network.hpp"
#include "projbnn/rng.hpp"

namespace projbnn {

// Regression models share a duck-typed interface: param_count / input_dim /
// output_dim and a scalar-generic predict(w, x).

struct MlpModel {
  Architecture arch;

  Index param_count() const { return arch.param_count(); }
  Index input_dim() const { return arch.input_dim(); }
  Index output_dim() const { return arch.output_dim(); }
  std::uint64_t fingerprint() const { return arch.fingerprint(); }

  template <class S>
  VectorX<S> predict(const VectorX<S>& w, const VectorX<S>& x) const {
    return mlp_forward(arch, w, x);
  }
};

// Bias-free single-output linear regressor, y = w . x. Small enough for
// closed-form Bayesian posteriors, which makes it the reference model in tests.
struct LinearModel {
  Index dim = 1;

  Index param_count() const { return dim; }
  Index input_dim() const { return dim; }
  Index output_dim() const { return 1; }
  std::uint64_t fingerprint() const { return fnv1a(cat("linear|", dim)); }

  template <class S>
  VectorX<S> predict(const VectorX<S>& w, const VectorX<S>& x) const {
    require(w.size() == dim && x.size() == dim, "linear model expects ", dim, " dims, got w=", w.size(), " x=", x.size());
    VectorX<S> out(1);
    out[0] = dot(w, x);
    return out;
  }
};

struct ObservationModel {
  double sigma_y = 0.1;

  void validate() const { require(sigma_y > 0.0, "observation noise std must be positive, got ", sigma_y); }
};

// log p(y | x, w) + log p(w) under N(0, prior_std^2) weights.
template <class Model, class S>
S log_joint(const Model& model, const VectorX<S>& w, const MatrixXd& x, const MatrixXd& y, double sigma_y,
            double prior_std) {
  require(x.rows() == y.rows(), "log_joint: x has ", x.rows(), " rows, y has ", y.rows());
  require(x.cols() == model.input_dim(), "log_joint: x has ", x.cols(), " cols, model expects ", model.input_dim());
  require(y.cols() == model.output_dim(), "log_joint: y has ", y.cols(), " cols, model expects ", model.output_dim());
  S ll(0.0);
  for (Index n = 0; n < x.rows(); ++n) {
    const VectorX<S> pred = model.predict(w, lift<S>(x.row(n).transpose()));
    ll += gaussian_log_density(lift<S>(y.row(n).transpose()), pred, sigma_y);
  }
  return ll + gaussian_log_density_iso(w, 0.0, prior_std);
}

// Mini-batch estimate: likelihood rescaled to the full dataset, prior once.
template <class Model, class S>
S log_joint_minibatch(const Model& model, const VectorX<S>& w, const MatrixXd& x_batch, const MatrixXd& y_batch,
                      double n_total, double sigma_y, double prior_std) {
  require(x_batch.rows() > 0, "log_joint_minibatch: empty batch");
  require(n_total >= static_cast<double>(x_batch.rows()), "log_joint_minibatch: n_total smaller than batch");
  S ll(0.0);
  for (Index n = 0; n < x_batch.rows(); ++n) {
    const VectorX<S> pred = model.predict(w, lift<S>(x_batch.row(n).transpose()));
    ll += gaussian_log_density(lift<S>(y_batch.row(n).transpose()), pred, sigma_y);
  }
  const double scale = n_total / static_cast<double>(x_batch.rows());
  return scale * ll + gaussian_log_density_iso(w, 0.0, prior_std);
}

double log_joint(const Architecture& arch, const WeightVector& w, const MatrixXd& x, const MatrixXd& y,
                 double sigma_y, double prior_std);

}  // namespace projbnn

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "projbnn/autoencoder.hpp"
#include "projbnn/dataset.hpp"
#include "projbnn/metrics.hpp"
#include "projbnn/models.hpp"
#include "projbnn/optim.hpp"

namespace projbnn {

// Diagonal Gaussian with free parameters (mu, log_std); std > 0 by construction.
struct MeanFieldGaussian {
  VectorXd mu;
  VectorXd log_std;

  Index size() const { return mu.size(); }
  void validate() const;
  static MeanFieldGaussian at_prior(Index n, double std_dev);
};

// N(mean, variance); the second parameter is a variance, not a std.
struct PriorSpec {
  double mean = 0.0;
  double variance = 0.1;

  double std_dev() const { return std::sqrt(variance); }
  void validate() const;
};

struct VarInferenceConfig {
  int mc_samples = 20;  // reparametrization draws per gradient step
  double lr = 0.01;
  int max_iterations = 50000;
  int early_stop_patience = 30;  // consecutive non-improving validation checks
  int check_every = 100;         // iterations between validation checks
  int eval_samples = 20;         // posterior draws per validation check
  int batch_size = 128;
  double phi_logstd_init_mean = -9.0;
  double phi_logstd_init_std = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

// How the decoder parameters enter the variational family: a learned
// mean-field factor, or a constant (point mass).
enum class PhiMode { variational, frozen };

inline std::string to_string(PhiMode m) { return m == PhiMode::variational ? "variational" : "frozen"; }

inline PhiMode phi_mode_from_string(const std::string& s) {
  if (s == "variational") return PhiMode::variational;
  if (s == "frozen") return PhiMode::frozen;
  throw std::invalid_argument(cat("unknown phi mode '", s, "'"));
}

enum class AblationKind { linear, one_stage, qz_only };
std::string to_string(AblationKind k);

VectorXd reparam_sample(const MeanFieldGaussian& q, const Eigen::Ref<const VectorXd>& eps);

template <class S>
VectorX<S> reparam_vars(const VectorX<S>& mu, const VectorX<S>& log_std, const VectorXd& eps) {
  require(mu.size() == log_std.size(), "reparam: mu has ", mu.size(), " entries, log_std has ", log_std.size());
  require(eps.size() == mu.size(), "reparam: eps has ", eps.size(), " entries, expected ", mu.size());
  VectorX<S> out(mu.size());
  for (Index i = 0; i < mu.size(); ++i) out[i] = mu[i] + exp(log_std[i]) * eps[i];
  return out;
}

// KL(q || p) for diagonal-Gaussian q against the iid prior, in closed form.
template <class S>
S kl_to_prior(const VectorX<S>& mu, const VectorX<S>& log_std, const PriorSpec& prior) {
  require(mu.size() == log_std.size(), "kl: mu has ", mu.size(), " entries, log_std has ", log_std.size());
  const double log_sigma_p = std::log(prior.std_dev());
  const double inv_two_var = 1.0 / (2.0 * prior.variance);
  S kl(0.0);
  for (Index i = 0; i < mu.size(); ++i) {
    const S centered = mu[i] - prior.mean;
    kl += (log_sigma_p - log_std[i]) + (exp(2.0 * log_std[i]) + centered * centered) * inv_two_var - 0.5;
  }
  return kl;
}

double kl_gaussian_diag(const MeanFieldGaussian& q, const PriorSpec& prior);

// One task's contribution to a stochastic ELBO step.
struct TaskBatch {
  MatrixXd x;
  MatrixXd y;
  double n_total = 0.0;  // full-dataset size the batch likelihood is rescaled to
};

// Monte Carlo ELBO over M tasks sharing one decoder. eps has one row per
// sample, columns laid out [z_1 .. z_M, phi]; the phi block is present only
// when q_phi is non-empty (mu_phi.size() > 0). With an empty mu_phi and a
// parametric decoder, phi_frozen supplies the point-mass decoder parameters.
template <class S, class Model>
S elbo_core(const Mapping& decoder, const Model& target, const std::vector<TaskBatch>& batches,
            const std::vector<VectorX<S>>& mu_z, const std::vector<VectorX<S>>& log_std_z,
            const VectorX<S>& mu_phi, const VectorX<S>& log_std_phi, const VectorXd& phi_frozen,
            const MatrixXd& eps, double sigma_y, const PriorSpec& prior) {
  const Index m_count = static_cast<Index>(batches.size());
  require(m_count >= 1, "ELBO needs at least one task");
  require(static_cast<Index>(mu_z.size()) == m_count && static_cast<Index>(log_std_z.size()) == m_count,
          "ELBO got ", mu_z.size(), " latent factors for ", m_count, " tasks");
  const Index d_z = decoder.in_dim;
  require(decoder.out_dim == target.param_count(), "decoder emits ", decoder.out_dim,
          " weights, model expects ", target.param_count());
  const bool phi_var = mu_phi.size() > 0;
  require(log_std_phi.size() == mu_phi.size(), "phi factor has ", mu_phi.size(), " means and ",
          log_std_phi.size(), " log stds");
  if (phi_var)
    require(mu_phi.size() == decoder.param_count(), "phi factor has ", mu_phi.size(),
            " entries, decoder expects ", decoder.param_count());
  else
    require(phi_frozen.size() == decoder.param_count(), "frozen phi has ", phi_frozen.size(),
            " entries, decoder expects ", decoder.param_count());
  const Index s_count = eps.rows();
  require(s_count >= 1, "ELBO needs at least one Monte Carlo sample");
  const Index phi_cols = phi_var ? mu_phi.size() : 0;
  require(eps.cols() == m_count * d_z + phi_cols, "eps draws have ", eps.cols(), " columns, expected ",
          m_count * d_z + phi_cols);
  for (Index m = 0; m < m_count; ++m) {
    require(mu_z[m].size() == d_z, "task ", m, " latent factor has ", mu_z[m].size(), " entries, expected ", d_z);
    require(batches[m].x.rows() == batches[m].y.rows(), "task ", m, " batch x/y row counts differ");
    require(batches[m].x.rows() == 0 || batches[m].n_total >= static_cast<double>(batches[m].x.rows()),
            "task ", m, " n_total smaller than its batch");
  }

  const VectorX<S> phi_const = lift<S>(phi_frozen);
  std::vector<S> ll(static_cast<std::size_t>(m_count), S(0.0));
  for (Index s = 0; s < s_count; ++s) {
    try {
      VectorX<S> phi = phi_const;
      if (phi_var) {
        const VectorXd eps_phi = eps.row(s).segment(m_count * d_z, phi_cols).transpose();
        phi = reparam_vars(mu_phi, log_std_phi, eps_phi);
      }
      for (Index m = 0; m < m_count; ++m) {
        if (batches[m].x.rows() == 0) continue;
        const VectorXd eps_z = eps.row(s).segment(m * d_z, d_z).transpose();
        const VectorX<S> z = reparam_vars(mu_z[m], log_std_z[m], eps_z);
        const VectorX<S> w = decoder.apply(phi, z);
        for (Index n = 0; n < batches[m].x.rows(); ++n) {
          const VectorX<S> pred = target.template predict<S>(w, lift<S>(batches[m].x.row(n).transpose()));
          ll[static_cast<std::size_t>(m)] +=
              gaussian_log_density(lift<S>(batches[m].y.row(n).transpose()), pred, sigma_y);
        }
      }
    } catch (const ad::NonFiniteError& e) {
      throw std::runtime_error(cat("sample ", s, ": ", e.what()));
    }
  }

  S elbo(0.0);
  for (Index m = 0; m < m_count; ++m) {
    const Index b = batches[m].x.rows();
    if (b > 0) elbo += (batches[m].n_total / static_cast<double>(b * s_count)) * ll[static_cast<std::size_t>(m)];
  }
  for (Index m = 0; m < m_count; ++m) elbo -= kl_to_prior(mu_z[m], log_std_z[m], prior);
  if (phi_var) elbo -= kl_to_prior(mu_phi, log_std_phi, prior);
  return elbo;
}

// Single-task ELBO for a network target. An empty q_phi is allowed only for
// parameterless decoders; frozen-phi evaluation goes through elbo_core.
double elbo_projbnn(const MeanFieldGaussian& q_z, const MeanFieldGaussian& q_phi, const Mapping& decoder,
                    const Architecture& target, const MatrixXd& batch_x, const MatrixXd& batch_y, double n_total,
                    const ObservationModel& obs, const PriorSpec& prior, const MatrixXd& eps);

// Fitted variational state plus its training history. Single-task methods
// hold exactly one latent factor; the multitask variant holds one per task.
struct VIFit {
  std::string method;
  std::vector<MeanFieldGaussian> q_z;
  MeanFieldGaussian q_phi;  // empty unless phi_mode == variational with a parametric decoder
  VectorXd phi_point;       // decoder parameters when phi is a point mass
  PhiMode phi_mode = PhiMode::variational;
  Mapping decoder;
  std::uint64_t target_fingerprint = 0;
  std::vector<double> elbo_trace;     // one stochastic ELBO value per iteration
  std::vector<int> check_iterations;  // iterations at which validation ran
  std::vector<double> valid_ll_trace;
  int best_iteration = 0;
  double best_valid_ll = -std::numeric_limits<double>::infinity();
  int iterations_run = 0;

  const MeanFieldGaussian& latent() const;
  void validate() const;
};

namespace detail {

// Pooled validation marginal log-likelihood: per-point logmeanexp over the
// eval draws, averaged over every validation point of every task.
template <class Model>
double pooled_valid_ll(const Mapping& decoder, const Model& target, const std::vector<Splits>& tasks,
                       const std::vector<MeanFieldGaussian>& q_z, const MeanFieldGaussian& q_phi,
                       const VectorXd& phi_point, const MatrixXd& eval_eps, double sigma_y) {
  const Index m_count = static_cast<Index>(tasks.size());
  const Index d_z = decoder.in_dim;
  const Index s_count = eval_eps.rows();
  const bool phi_var = q_phi.size() > 0;
  std::vector<double> point_ll;
  VectorXd sample_ll(s_count);
  for (Index m = 0; m < m_count; ++m) {
    const Dataset& valid = tasks[static_cast<std::size_t>(m)].valid;
    MatrixXd ll(s_count, valid.n());
    for (Index s = 0; s < s_count; ++s) {
      const VectorXd phi =
          phi_var ? reparam_sample(q_phi, eval_eps.row(s).segment(m_count * d_z, q_phi.size()).transpose())
                  : phi_point;
      const VectorXd z = reparam_sample(q_z[static_cast<std::size_t>(m)],
                                        eval_eps.row(s).segment(m * d_z, d_z).transpose());
      const VectorXd w = decoder.apply<double>(phi, z);
      for (Index n = 0; n < valid.n(); ++n) {
        const VectorXd pred = target.template predict<double>(w, VectorXd(valid.x.row(n).transpose()));
        ll(s, n) = gaussian_log_density(VectorXd(valid.y.row(n).transpose()), pred, sigma_y);
      }
    }
    for (Index n = 0; n < valid.n(); ++n) {
      sample_ll = ll.col(n);
      point_ll.push_back(logmeanexp(sample_ll));
    }
  }
  double total = 0.0;
  for (const double v : point_ll) total += v;
  return total / static_cast<double>(point_ll.size());
}

}  // namespace detail

// Shared training loop behind every variational method. Maximizes the Monte
// Carlo ELBO with Adam, checks validation marginal LL every check_every
// iterations against a fixed set of eval draws, stops after
// early_stop_patience consecutive non-improving checks, and returns the
// best-validation iterate (the final one if no check ever ran).
//
// phi_init is the variational mean initializer when phi_mode == variational
// and the constant decoder parameters when phi_mode == frozen.
template <class Model>
VIFit train_vi_core(const Mapping& decoder, const Model& target, const std::vector<Splits>& tasks,
                    const ObservationModel& obs, const PriorSpec& prior, const VarInferenceConfig& cfg,
                    PhiMode phi_mode, const VectorXd& phi_init) {
  cfg.validate();
  obs.validate();
  prior.validate();
  decoder.validate();
  require(!tasks.empty(), "variational training needs at least one task");
  require(decoder.out_dim == target.param_count(), "decoder emits ", decoder.out_dim,
          " weights, model expects ", target.param_count());
  require(phi_init.size() == decoder.param_count(), "phi initializer has ", phi_init.size(),
          " entries, decoder expects ", decoder.param_count());
  require(phi_init.allFinite(), "phi initializer contains non-finite values");
  for (const Splits& t : tasks) {
    t.train.validate();
    t.valid.validate();
    require(t.train.x_dim() == target.input_dim() && t.train.y_dim() == target.output_dim(),
            "task data is ", t.train.x_dim(), " -> ", t.train.y_dim(), ", model expects ",
            target.input_dim(), " -> ", target.output_dim());
  }

  const Index m_count = static_cast<Index>(tasks.size());
  const Index d_z = decoder.in_dim;
  const Index d_phi = phi_mode == PhiMode::variational ? decoder.param_count() : 0;

  VIFit fit;
  fit.phi_mode = phi_mode;
  fit.decoder = decoder;
  fit.target_fingerprint = target.fingerprint();
  if (phi_mode == PhiMode::frozen) fit.phi_point = phi_init;

  // flat layout: [mu_z, log_std_z] per task, then [mu_phi, log_std_phi]
  VectorXd params(2 * m_count * d_z + 2 * d_phi);
  const double prior_log_std = std::log(prior.std_dev());
  for (Index m = 0; m < m_count; ++m) {
    params.segment(2 * m * d_z, d_z).setZero();
    params.segment(2 * m * d_z + d_z, d_z).setConstant(prior_log_std);
  }
  if (d_phi > 0) {
    Rng phi_rng = substream(cfg.seed, "vi.init.phi");
    params.segment(2 * m_count * d_z, d_phi) = phi_init;
    params.segment(2 * m_count * d_z + d_phi, d_phi) =
        (phi_rng.normal_vector(d_phi) * cfg.phi_logstd_init_std).array() + cfg.phi_logstd_init_mean;
  }

  Rng eps_rng = substream(cfg.seed, "vi.eps");
  std::vector<BatchStream> batch_streams;
  batch_streams.reserve(static_cast<std::size_t>(m_count));
  for (Index m = 0; m < m_count; ++m)
    batch_streams.emplace_back(tasks[static_cast<std::size_t>(m)].train.n(), cfg.batch_size,
                               substream(cfg.seed, cat("vi.batch.", m)));
  Rng eval_rng = substream(cfg.seed, "vi.eval");
  const MatrixXd eval_eps = eval_rng.normal_matrix(cfg.eval_samples, m_count * d_z + d_phi);

  const auto unpack = [&](const VectorXd& p, std::vector<MeanFieldGaussian>& qz, MeanFieldGaussian& qphi) {
    qz.resize(static_cast<std::size_t>(m_count));
    for (Index m = 0; m < m_count; ++m) {
      qz[static_cast<std::size_t>(m)].mu = p.segment(2 * m * d_z, d_z);
      qz[static_cast<std::size_t>(m)].log_std = p.segment(2 * m * d_z + d_z, d_z);
    }
    qphi.mu = p.segment(2 * m_count * d_z, d_phi);
    qphi.log_std = p.segment(2 * m_count * d_z + d_phi, d_phi);
  };

  Adam adam(AdamConfig{cfg.lr}, params.size());
  ad::GradientWorkspace ws;
  VectorXd grad;
  std::vector<TaskBatch> batches(static_cast<std::size_t>(m_count));
  std::vector<MeanFieldGaussian> qz_now;
  MeanFieldGaussian qphi_now;
  VectorXd best_params = params;
  int bad_checks = 0;
  bool any_check = false;
  int last_iteration = 0;

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    last_iteration = it;
    for (Index m = 0; m < m_count; ++m) {
      const Dataset& train = tasks[static_cast<std::size_t>(m)].train;
      const Dataset batch = train.take(batch_streams[static_cast<std::size_t>(m)].next());
      batches[static_cast<std::size_t>(m)] = TaskBatch{batch.x, batch.y, static_cast<double>(train.n())};
    }
    const MatrixXd eps = eps_rng.normal_matrix(cfg.mc_samples, m_count * d_z + d_phi);
    double value = 0.0;
    try {
      value = ws.value_and_grad(
          [&](const VectorX<ad::Var>& p) {
            std::vector<VectorX<ad::Var>> mu_z(static_cast<std::size_t>(m_count));
            std::vector<VectorX<ad::Var>> log_std_z(static_cast<std::size_t>(m_count));
            for (Index m = 0; m < m_count; ++m) {
              mu_z[static_cast<std::size_t>(m)] = p.segment(2 * m * d_z, d_z);
              log_std_z[static_cast<std::size_t>(m)] = p.segment(2 * m * d_z + d_z, d_z);
            }
            const VectorX<ad::Var> mu_phi = p.segment(2 * m_count * d_z, d_phi);
            const VectorX<ad::Var> log_std_phi = p.segment(2 * m_count * d_z + d_phi, d_phi);
            return elbo_core<ad::Var>(decoder, target, batches, mu_z, log_std_z, mu_phi, log_std_phi,
                                      fit.phi_point, eps, obs.sigma_y, prior);
          },
          params, grad);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(cat("variational training diverged at iteration ", it, ", ", e.what()));
    }
    fit.elbo_trace.push_back(value);
    grad = -grad;  // ascend
    adam.step(params, grad);

    if (it % cfg.check_every == 0) {
      unpack(params, qz_now, qphi_now);
      const double valid_ll = detail::pooled_valid_ll(decoder, target, tasks, qz_now, qphi_now, fit.phi_point,
                                                      eval_eps, obs.sigma_y);
      fit.check_iterations.push_back(it);
      fit.valid_ll_trace.push_back(valid_ll);
      any_check = true;
      if (valid_ll > fit.best_valid_ll) {
        fit.best_valid_ll = valid_ll;
        fit.best_iteration = it;
        best_params = params;
        bad_checks = 0;
      } else if (++bad_checks >= cfg.early_stop_patience) {
        break;
      }
    }
  }

  fit.iterations_run = last_iteration;
  if (!any_check) {
    best_params = params;
    fit.best_iteration = last_iteration;
  }
  unpack(best_params, fit.q_z, fit.q_phi);
  return fit;
}

// Stage 3: mean-field factors over the latent code and the decoder
// parameters, with the decoder mean started at the autoencoder solution.
VIFit train_projbnn(const Architecture& target, const AutoencoderParams& ae, const Splits& splits,
                    const ObservationModel& obs, const PriorSpec& prior, const VarInferenceConfig& cfg);

// Mean-field VI directly over the network weights (identity decoder).
VIFit train_bbb(const Architecture& target, const Splits& splits, const ObservationModel& obs,
                const PriorSpec& prior, const VarInferenceConfig& cfg);

// linear: same contract as train_projbnn but expects an affine decoder.
// one_stage: ignores the trained autoencoder parameters, random decoder mean.
// qz_only: decoder frozen at the autoencoder solution, only q(z) is learned.
VIFit train_ablation(AblationKind kind, const Architecture& target, const AutoencoderParams& ae,
                     const Splits& splits, const ObservationModel& obs, const PriorSpec& prior,
                     const VarInferenceConfig& cfg);

// Posterior weight draws for one task: per sample z ~ q_z[task] (and
// phi ~ q_phi when variational), decoded to a weight vector row.
MatrixXd sample_posterior_weights(const VIFit& fit, Index task, int n_samples, Rng& rng);

// Per-sample function values and pointwise log-likelihoods on a dataset.
PredictiveSampleSet collect_predictive_samples(const Architecture& target, const MatrixXd& weight_samples,
                                               const Dataset& data, const ObservationModel& obs);

// Per-sample function values on a bare input grid (single-output models).
MatrixXd function_samples(const Architecture& target, const MatrixXd& weight_samples, const MatrixXd& x);

}  // namespace projbnn

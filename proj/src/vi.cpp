#include "projbnn/vi.hpp"

namespace projbnn {

void MeanFieldGaussian::validate() const {
  require(mu.size() == log_std.size(), "factor has ", mu.size(), " means and ", log_std.size(), " log stds");
  require(mu.allFinite() && log_std.allFinite(), "factor parameters contain non-finite values");
}

MeanFieldGaussian MeanFieldGaussian::at_prior(Index n, double std_dev) {
  require(n >= 0, "factor length must be non-negative, got ", n);
  require(std_dev > 0.0, "factor std must be positive, got ", std_dev);
  MeanFieldGaussian q;
  q.mu = VectorXd::Zero(n);
  q.log_std = VectorXd::Constant(n, std::log(std_dev));
  return q;
}

void PriorSpec::validate() const {
  require(variance > 0.0, "prior variance must be positive, got ", variance);
  require(std::isfinite(mean), "prior mean must be finite");
}

void VarInferenceConfig::validate() const {
  require(mc_samples >= 1, "need at least one Monte Carlo sample, got ", mc_samples);
  require(lr > 0.0, "learning rate must be positive, got ", lr);
  require(max_iterations >= 0, "iteration count must be non-negative, got ", max_iterations);
  require(early_stop_patience >= 1, "patience must be at least one check, got ", early_stop_patience);
  require(check_every >= 1, "check interval must be positive, got ", check_every);
  require(eval_samples >= 1, "need at least one evaluation sample, got ", eval_samples);
  require(batch_size >= 1, "batch size must be positive, got ", batch_size);
  require(phi_logstd_init_std >= 0.0, "phi log-std init spread must be non-negative, got ", phi_logstd_init_std);
}

std::string to_string(AblationKind k) {
  switch (k) {
    case AblationKind::linear: return "linear";
    case AblationKind::one_stage: return "one_stage";
    case AblationKind::qz_only: return "qz_only";
  }
  throw std::invalid_argument("unknown ablation kind");
}

VectorXd reparam_sample(const MeanFieldGaussian& q, const Eigen::Ref<const VectorXd>& eps) {
  q.validate();
  return reparam_vars<double>(q.mu, q.log_std, eps);
}

double kl_gaussian_diag(const MeanFieldGaussian& q, const PriorSpec& prior) {
  q.validate();
  prior.validate();
  return kl_to_prior<double>(q.mu, q.log_std, prior);
}

double elbo_projbnn(const MeanFieldGaussian& q_z, const MeanFieldGaussian& q_phi, const Mapping& decoder,
                    const Architecture& target, const MatrixXd& batch_x, const MatrixXd& batch_y, double n_total,
                    const ObservationModel& obs, const PriorSpec& prior, const MatrixXd& eps) {
  q_z.validate();
  q_phi.validate();
  obs.validate();
  prior.validate();
  require(q_phi.size() == decoder.param_count() || (q_phi.size() == 0 && decoder.param_count() == 0),
          "phi factor has ", q_phi.size(), " entries, decoder expects ", decoder.param_count());
  const MlpModel model{target};
  std::vector<TaskBatch> batches(1);
  batches[0] = TaskBatch{batch_x, batch_y, n_total};
  const std::vector<VectorXd> mu_z{q_z.mu};
  const std::vector<VectorXd> log_std_z{q_z.log_std};
  return elbo_core<double>(decoder, model, batches, mu_z, log_std_z, q_phi.mu, q_phi.log_std, VectorXd(0), eps,
                           obs.sigma_y, prior);
}

const MeanFieldGaussian& VIFit::latent() const {
  require(q_z.size() == 1, "fit holds ", q_z.size(), " latent factors; pick one by task index");
  return q_z[0];
}

void VIFit::validate() const {
  decoder.validate();
  require(!q_z.empty(), "fit holds no latent factors");
  for (const MeanFieldGaussian& q : q_z) {
    q.validate();
    require(q.size() == decoder.in_dim, "latent factor has ", q.size(), " entries, decoder reads ",
            decoder.in_dim);
  }
  q_phi.validate();
  if (phi_mode == PhiMode::variational)
    require(q_phi.size() == decoder.param_count() || decoder.param_count() == 0,
            "phi factor has ", q_phi.size(), " entries, decoder expects ", decoder.param_count());
  else
    require(phi_point.size() == decoder.param_count(), "frozen phi has ", phi_point.size(),
            " entries, decoder expects ", decoder.param_count());
}

VIFit train_projbnn(const Architecture& target, const AutoencoderParams& ae, const Splits& splits,
                    const ObservationModel& obs, const PriorSpec& prior, const VarInferenceConfig& cfg) {
  ae.validate();
  require(ae.target_fingerprint == target.fingerprint(), "autoencoder was fit to a different target network");
  const MlpModel model{target};
  VIFit fit = train_vi_core(ae.decoder, model, {splits}, obs, prior, cfg, PhiMode::variational, ae.phi);
  fit.method = "projbnn";
  return fit;
}

VIFit train_bbb(const Architecture& target, const Splits& splits, const ObservationModel& obs,
                const PriorSpec& prior, const VarInferenceConfig& cfg) {
  const MlpModel model{target};
  const Mapping decoder = Mapping::identity_map(target.param_count());
  VIFit fit = train_vi_core(decoder, model, {splits}, obs, prior, cfg, PhiMode::frozen, VectorXd(0));
  fit.method = "bbb";
  return fit;
}

VIFit train_ablation(AblationKind kind, const Architecture& target, const AutoencoderParams& ae,
                     const Splits& splits, const ObservationModel& obs, const PriorSpec& prior,
                     const VarInferenceConfig& cfg) {
  ae.validate();
  require(ae.target_fingerprint == target.fingerprint(), "autoencoder was fit to a different target network");
  const MlpModel model{target};
  VIFit fit;
  switch (kind) {
    case AblationKind::linear:
      require(ae.decoder.kind == MapKind::affine, "linear ablation expects an affine decoder, got ",
              to_string(ae.decoder.kind));
      fit = train_vi_core(ae.decoder, model, {splits}, obs, prior, cfg, PhiMode::variational, ae.phi);
      break;
    case AblationKind::one_stage: {
      Rng mu_rng = substream(cfg.seed, "vi.init.phi_mu");
      const VectorXd phi_mu = init_mapping_params(ae.decoder, mu_rng);
      fit = train_vi_core(ae.decoder, model, {splits}, obs, prior, cfg, PhiMode::variational, phi_mu);
      break;
    }
    case AblationKind::qz_only:
      fit = train_vi_core(ae.decoder, model, {splits}, obs, prior, cfg, PhiMode::frozen, ae.phi);
      break;
  }
  fit.method = to_string(kind);
  return fit;
}

MatrixXd sample_posterior_weights(const VIFit& fit, Index task, int n_samples, Rng& rng) {
  fit.validate();
  require(task >= 0 && task < static_cast<Index>(fit.q_z.size()), "task index ", task, " out of range [0, ",
          fit.q_z.size(), ")");
  require(n_samples >= 1, "need at least one posterior sample, got ", n_samples);
  const MeanFieldGaussian& q_z = fit.q_z[static_cast<std::size_t>(task)];
  const bool phi_var = fit.q_phi.size() > 0;
  MatrixXd out(n_samples, fit.decoder.out_dim);
  for (int s = 0; s < n_samples; ++s) {
    const VectorXd z = reparam_sample(q_z, rng.normal_vector(q_z.size()));
    const VectorXd phi =
        phi_var ? reparam_sample(fit.q_phi, rng.normal_vector(fit.q_phi.size())) : fit.phi_point;
    out.row(s) = fit.decoder.apply<double>(phi, z).transpose();
  }
  return out;
}

PredictiveSampleSet collect_predictive_samples(const Architecture& target, const MatrixXd& weight_samples,
                                               const Dataset& data, const ObservationModel& obs) {
  target.validate();
  obs.validate();
  data.validate();
  require(weight_samples.rows() > 0, "need at least one weight sample");
  require(weight_samples.cols() == target.param_count(), "weight samples have ", weight_samples.cols(),
          " columns, network has ", target.param_count());
  require(target.output_dim() == 1, "predictive samples assume a single-output network, got ",
          target.output_dim(), " outputs");
  const MlpModel model{target};
  PredictiveSampleSet out;
  out.sigma_y = obs.sigma_y;
  out.function_values.resize(weight_samples.rows(), data.n());
  out.point_loglik.resize(weight_samples.rows(), data.n());
  for (Index s = 0; s < weight_samples.rows(); ++s) {
    const VectorXd w = weight_samples.row(s).transpose();
    for (Index n = 0; n < data.n(); ++n) {
      const VectorXd pred = model.predict<double>(w, VectorXd(data.x.row(n).transpose()));
      out.function_values(s, n) = pred[0];
      out.point_loglik(s, n) = gaussian_log_density(data.y(n, 0), pred[0], obs.sigma_y);
    }
  }
  return out;
}

MatrixXd function_samples(const Architecture& target, const MatrixXd& weight_samples, const MatrixXd& x) {
  target.validate();
  require(weight_samples.rows() > 0, "need at least one weight sample");
  require(weight_samples.cols() == target.param_count(), "weight samples have ", weight_samples.cols(),
          " columns, network has ", target.param_count());
  require(target.output_dim() == 1, "function samples assume a single-output network, got ",
          target.output_dim(), " outputs");
  require(x.cols() == target.input_dim(), "grid has ", x.cols(), " columns, network expects ",
          target.input_dim());
  const MlpModel model{target};
  MatrixXd out(weight_samples.rows(), x.rows());
  for (Index s = 0; s < weight_samples.rows(); ++s) {
    const VectorXd w = weight_samples.row(s).transpose();
    for (Index n = 0; n < x.rows(); ++n)
      out(s, n) = model.predict<double>(w, VectorXd(x.row(n).transpose()))[0];
  }
  return out;
}

}  // namespace projbnn

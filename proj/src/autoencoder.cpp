#include "projbnn/autoencoder.hpp"

#include <optional>
#include <stdexcept>
#include <utility>

#include "projbnn/optim.hpp"

namespace projbnn {

std::string to_string(MapKind k) {
  switch (k) {
    case MapKind::identity: return "identity";
    case MapKind::affine: return "affine";
    case MapKind::mlp: return "mlp";
  }
  throw std::invalid_argument("unknown mapping kind");
}

MapKind map_kind_from_string(const std::string& s) {
  if (s == "identity") return MapKind::identity;
  if (s == "affine") return MapKind::affine;
  if (s == "mlp") return MapKind::mlp;
  throw std::invalid_argument(cat("unknown mapping kind '", s, "'"));
}

Mapping Mapping::identity_map(Index dim) {
  Mapping m;
  m.kind = MapKind::identity;
  m.in_dim = dim;
  m.out_dim = dim;
  m.validate();
  return m;
}

Mapping Mapping::affine_map(Index in, Index out) {
  Mapping m;
  m.kind = MapKind::affine;
  m.in_dim = in;
  m.out_dim = out;
  m.validate();
  return m;
}

Mapping Mapping::mlp_map(Architecture arch) {
  arch.validate();
  Mapping m;
  m.kind = MapKind::mlp;
  m.in_dim = arch.input_dim();
  m.out_dim = arch.output_dim();
  m.arch = std::move(arch);
  return m;
}

void Mapping::validate() const {
  require(in_dim > 0, "mapping input dimension must be positive, got ", in_dim);
  require(out_dim > 0, "mapping output dimension must be positive, got ", out_dim);
  if (kind == MapKind::identity)
    require(in_dim == out_dim, "identity mapping needs equal dimensions, got ", in_dim, " -> ", out_dim);
  if (kind == MapKind::mlp) {
    arch.validate();
    require(arch.input_dim() == in_dim && arch.output_dim() == out_dim,
            "mapping network is ", arch.input_dim(), " -> ", arch.output_dim(),
            ", mapping declares ", in_dim, " -> ", out_dim);
  }
}

Index Mapping::param_count() const {
  switch (kind) {
    case MapKind::identity: return 0;
    case MapKind::affine: return (in_dim + 1) * out_dim;
    case MapKind::mlp: return arch.param_count();
  }
  throw std::invalid_argument("unknown mapping kind");
}

std::uint64_t Mapping::fingerprint() const {
  validate();
  const std::uint64_t arch_fp = kind == MapKind::mlp ? arch.fingerprint() : 0;
  return fnv1a(cat("map|", to_string(kind), "|", in_dim, "|", out_dim, "|", arch_fp));
}

void AutoencoderParams::validate() const {
  encoder.validate();
  decoder.validate();
  require(encoder.out_dim == decoder.in_dim, "encoder emits ", encoder.out_dim,
          " latent dims, decoder expects ", decoder.in_dim);
  require(encoder.in_dim == decoder.out_dim, "encoder reads ", encoder.in_dim,
          " weights, decoder emits ", decoder.out_dim);
  require(theta.size() == encoder.param_count(), "encoder has ", theta.size(),
          " parameters, expected ", encoder.param_count());
  require(phi.size() == decoder.param_count(), "decoder has ", phi.size(),
          " parameters, expected ", decoder.param_count());
  require(theta.allFinite(), "encoder parameters contain non-finite values");
  require(phi.allFinite(), "decoder parameters contain non-finite values");
}

VectorXd encode(const AutoencoderParams& ae, const Eigen::Ref<const VectorXd>& w) {
  ae.validate();
  return ae.encoder.apply<double>(ae.theta, VectorXd(w));
}

VectorXd decode(const AutoencoderParams& ae, const Eigen::Ref<const VectorXd>& z) {
  ae.validate();
  return ae.decoder.apply<double>(ae.phi, VectorXd(z));
}

void PcaeConfig::validate() const {
  require(beta >= 0.0, "beta must be non-negative, got ", beta);
  require(input_noise_std >= 0.0, "input noise std must be non-negative, got ", input_noise_std);
  require(lr > 0.0, "learning rate must be positive, got ", lr);
  require(iterations >= 0, "iteration count must be non-negative, got ", iterations);
  require(batch_snapshots > 0, "snapshot batch size must be positive, got ", batch_snapshots);
  require(data_batch_size >= 0, "data batch size must be non-negative, got ", data_batch_size);
  require(latent_target_std > 0.0, "latent target std must be positive, got ", latent_target_std);
}

double pcae_loss(const AutoencoderParams& ae, const Architecture& target, const MatrixXd& snapshots,
                 const MatrixXd& noise, const Dataset& train, const ObservationModel& obs, double beta) {
  ae.validate();
  obs.validate();
  require(ae.target_fingerprint == target.fingerprint(), "autoencoder was fit to a different target network");
  require(snapshots.cols() == ae.weight_dim(), "snapshots have ", snapshots.cols(),
          " columns, autoencoder reads ", ae.weight_dim(), " weights");
  const MlpModel model{target};
  return pcae_loss_core<double>(ae.encoder, ae.decoder, ae.theta, ae.phi, snapshots, noise, model, train.x,
                                train.y, obs.sigma_y, beta);
}

VectorXd init_mapping_params(const Mapping& m, Rng& rng) {
  switch (m.kind) {
    case MapKind::identity:
      return VectorXd(0);
    case MapKind::affine: {
      const double std_dev = 1.0 / std::sqrt(static_cast<double>(m.in_dim + 1));
      return rng.normal_vector(m.param_count()) * std_dev;
    }
    case MapKind::mlp:
      return default_init(m.arch, rng);
  }
  throw std::invalid_argument("unknown mapping kind");
}

namespace {

// Flat location of one affine block inside a mapping's parameter vector.
struct LayerRef {
  Index offset = 0;
  Index fan_in = 0;
  Index n_units = 0;
};

LayerRef output_layer(const Mapping& m) {
  if (m.kind == MapKind::affine) return {0, m.in_dim, m.out_dim};
  const auto& sizes = m.arch.layer_sizes;
  const Index fan_in = sizes[sizes.size() - 2];
  const Index n_units = sizes.back();
  return {m.param_count() - (fan_in + 1) * n_units, fan_in, n_units};
}

LayerRef input_layer(const Mapping& m) {
  if (m.kind == MapKind::affine) return {0, m.in_dim, m.out_dim};
  return {0, m.arch.layer_sizes[0], m.arch.layer_sizes[1]};
}

}  // namespace

void standardize_latent_codes(AutoencoderParams& ae, const MatrixXd& snapshot_weights, double target_std) {
  ae.validate();
  require(target_std > 0.0, "latent target std must be positive, got ", target_std);
  require(ae.encoder.kind != MapKind::identity && ae.decoder.kind != MapKind::identity,
          "latent standardization needs a parametric encoder and decoder");
  require(snapshot_weights.rows() > 0, "latent standardization needs at least one snapshot");
  require(snapshot_weights.cols() == ae.weight_dim(), "snapshots have ", snapshot_weights.cols(),
          " columns, autoencoder reads ", ae.weight_dim(), " weights");

  const Index n = snapshot_weights.rows();
  const Index d_z = ae.latent_dim();
  MatrixXd codes(n, d_z);
  for (Index r = 0; r < n; ++r)
    codes.row(r) = ae.encoder.apply<double>(ae.theta, VectorXd(snapshot_weights.row(r).transpose())).transpose();

  const VectorXd mean = codes.colwise().mean().transpose();
  const VectorXd var = (codes.rowwise() - mean.transpose()).array().square().colwise().mean().transpose();

  // scale[k] maps old code scale to the target; degenerate dims are only centered
  VectorXd scale(d_z);
  for (Index k = 0; k < d_z; ++k) {
    const double s = std::sqrt(var[k]);
    scale[k] = s < 1e-9 ? 1.0 : target_std / s;
  }

  // Encoder output unit k now emits scale[k] * (z_k - mean[k]).
  const LayerRef enc = output_layer(ae.encoder);
  for (Index k = 0; k < enc.n_units; ++k) {
    const Index base = enc.offset + k * (enc.fan_in + 1);
    ae.theta[base + enc.fan_in] -= mean[k];
    ae.theta.segment(base, enc.fan_in + 1) *= scale[k];
  }

  // Decoder input units absorb the inverse so the composed map is unchanged:
  // the bias fold must read the original weights, so it runs before rescaling.
  const LayerRef dec = input_layer(ae.decoder);
  for (Index j = 0; j < dec.n_units; ++j) {
    const Index base = dec.offset + j * (dec.fan_in + 1);
    ae.phi[base + dec.fan_in] += ae.phi.segment(base, dec.fan_in).dot(mean);
    for (Index k = 0; k < dec.fan_in; ++k) ae.phi[base + k] /= scale[k];
  }
}

double reconstruction_mse(const AutoencoderParams& ae, const MatrixXd& snapshot_weights) {
  ae.validate();
  require(snapshot_weights.rows() > 0, "reconstruction error needs at least one snapshot");
  require(snapshot_weights.cols() == ae.weight_dim(), "snapshots have ", snapshot_weights.cols(),
          " columns, autoencoder reads ", ae.weight_dim(), " weights");
  double total = 0.0;
  for (Index r = 0; r < snapshot_weights.rows(); ++r) {
    const VectorXd w = snapshot_weights.row(r).transpose();
    const VectorXd rebuilt = decode(ae, encode(ae, w));
    total += (w - rebuilt).squaredNorm();
  }
  return total / static_cast<double>(snapshot_weights.size());
}

double decoded_loglik(const AutoencoderParams& ae, const Architecture& target, const MatrixXd& snapshot_weights,
                      const Dataset& data, const ObservationModel& obs) {
  ae.validate();
  obs.validate();
  data.validate();
  require(ae.target_fingerprint == target.fingerprint(), "autoencoder was fit to a different target network");
  require(snapshot_weights.rows() > 0, "decoded log-likelihood needs at least one snapshot");
  const MlpModel model{target};
  double total = 0.0;
  for (Index r = 0; r < snapshot_weights.rows(); ++r) {
    const VectorXd rebuilt = decode(ae, VectorXd(encode(ae, snapshot_weights.row(r).transpose())));
    for (Index i = 0; i < data.n(); ++i) {
      const VectorXd pred = model.predict<double>(rebuilt, VectorXd(data.x.row(i).transpose()));
      total += gaussian_log_density(VectorXd(data.y.row(i).transpose()), pred, obs.sigma_y);
    }
  }
  return total / static_cast<double>(snapshot_weights.rows() * data.n());
}

PcaeResult train_pcae(const SnapshotSet& snapshots, const Splits& splits, const Architecture& target,
                      const ObservationModel& obs, const Mapping& encoder, const Mapping& decoder,
                      const PcaeConfig& cfg) {
  cfg.validate();
  obs.validate();
  splits.train.validate();
  require(snapshots.weights.rows() > 0, "projection training needs at least one snapshot");
  require(snapshots.arch_fingerprint == target.fingerprint(),
          "snapshot set was collected for a different target network");
  require(snapshots.weights.cols() == target.param_count(), "snapshots have ", snapshots.weights.cols(),
          " columns, target network has ", target.param_count(), " weights");

  Rng init_rng = substream(cfg.seed, "pcae.init");
  AutoencoderParams ae;
  ae.encoder = encoder;
  ae.decoder = decoder;
  ae.theta = init_mapping_params(encoder, init_rng);
  ae.phi = init_mapping_params(decoder, init_rng);
  ae.target_fingerprint = target.fingerprint();
  ae.validate();
  require(ae.weight_dim() == target.param_count(), "encoder reads ", ae.weight_dim(),
          " weights, target network has ", target.param_count());

  const MlpModel model{target};
  const Index d_w = snapshots.weights.cols();
  const Index n_theta = ae.theta.size();
  const Index n_phi = ae.phi.size();
  VectorXd params(n_theta + n_phi);
  params << ae.theta, ae.phi;

  BatchStream snapshot_batches(snapshots.weights.rows(), cfg.batch_snapshots, substream(cfg.seed, "pcae.batch"));
  std::optional<BatchStream> data_batches;
  if (cfg.data_batch_size > 0)
    data_batches.emplace(splits.train.n(), cfg.data_batch_size, substream(cfg.seed, "pcae.data"));
  Rng noise_rng = substream(cfg.seed, "pcae.noise");

  Adam adam(AdamConfig{cfg.lr}, params.size());
  ad::GradientWorkspace ws;
  VectorXd grad;
  Dataset subsample;
  for (int it = 0; it < cfg.iterations; ++it) {
    const std::vector<int>& rows = snapshot_batches.next();
    MatrixXd batch_w(static_cast<Index>(rows.size()), d_w);
    for (std::size_t b = 0; b < rows.size(); ++b) batch_w.row(static_cast<Index>(b)) = snapshots.weights.row(rows[b]);
    const MatrixXd noise = noise_rng.normal_matrix(batch_w.rows(), d_w) * cfg.input_noise_std;
    const Dataset* scored = &splits.train;
    if (data_batches) {
      subsample = splits.train.take(data_batches->next());
      scored = &subsample;
    }
    try {
      ws.value_and_grad(
          [&](const VectorX<ad::Var>& p) {
            const VectorX<ad::Var> theta = p.head(n_theta);
            const VectorX<ad::Var> phi = p.tail(n_phi);
            return pcae_loss_core<ad::Var>(ae.encoder, ae.decoder, theta, phi, batch_w, noise, model, scored->x,
                                           scored->y, obs.sigma_y, cfg.beta);
          },
          params, grad);
    } catch (const ad::NonFiniteError& e) {
      throw std::runtime_error(cat("projection training diverged at iteration ", it, ": ", e.what()));
    }
    adam.step(params, grad);
  }
  ae.theta = params.head(n_theta);
  ae.phi = params.tail(n_phi);

  if (cfg.standardize_latent && ae.encoder.kind != MapKind::identity && ae.decoder.kind != MapKind::identity)
    standardize_latent_codes(ae, snapshots.weights, cfg.latent_target_std);

  PcaeResult out;
  out.recon_mse = reconstruction_mse(ae, snapshots.weights);
  out.decoded_train_ll = decoded_loglik(ae, target, snapshots.weights, splits.train, obs);
  out.iterations_run = cfg.iterations;
  out.params = std::move(ae);
  return out;
}

}  // namespace projbnn

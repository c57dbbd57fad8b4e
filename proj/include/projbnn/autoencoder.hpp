#pragma once

#include <cstdint>
#include <string>

#include "projbnn/dataset.hpp"
#include "projbnn/ensemble.hpp"
#include "projbnn/models.hpp"

namespace projbnn {

enum class MapKind { identity, affine, mlp };

std::string to_string(MapKind k);
MapKind map_kind_from_string(const std::string& s);

// Parametric map between weight space and latent space. identity carries no
// parameters (and forces in == out), affine is a single linear layer, mlp is
// a full network. Unit blocks share the MLP layout (bias last).
struct Mapping {
  MapKind kind = MapKind::identity;
  Index in_dim = 0;
  Index out_dim = 0;
  Architecture arch;  // used when kind == mlp

  static Mapping identity_map(Index dim);
  static Mapping affine_map(Index in, Index out);
  static Mapping mlp_map(Architecture arch);

  void validate() const;
  Index param_count() const;
  std::uint64_t fingerprint() const;

  template <class S>
  VectorX<S> apply(const VectorX<S>& params, const VectorX<S>& input) const {
    validate();
    require(input.size() == in_dim, "mapping expects ", in_dim, " inputs, got ", input.size());
    require(params.size() == param_count(), "mapping expects ", param_count(), " parameters, got ", params.size());
    switch (kind) {
      case MapKind::identity:
        return input;
      case MapKind::affine:
        return affine_layer(params, 0, in_dim, out_dim, input);
      case MapKind::mlp:
        return mlp_forward(arch, params, input);
    }
    throw std::invalid_argument("unknown mapping kind");
  }
};

// Trained weight-space autoencoder: encoder theta maps weights to codes,
// decoder phi maps codes back to weights.
struct AutoencoderParams {
  Mapping encoder;  // D_w -> D_z
  Mapping decoder;  // D_z -> D_w
  VectorXd theta;
  VectorXd phi;
  std::uint64_t target_fingerprint = 0;

  Index latent_dim() const { return encoder.out_dim; }
  Index weight_dim() const { return encoder.in_dim; }
  void validate() const;
};

VectorXd encode(const AutoencoderParams& ae, const Eigen::Ref<const VectorXd>& w);
VectorXd decode(const AutoencoderParams& ae, const Eigen::Ref<const VectorXd>& z);

struct PcaeConfig {
  double beta = 1.0;            // weight of the prediction constraint, >= 0
  double input_noise_std = 1.0; // std of the corruption added before encoding
  double lr = 0.001;
  int iterations = 50000;
  int batch_snapshots = 128;
  int data_batch_size = 0;  // 0: every step scores the full training set
  bool standardize_latent = true;
  double latent_target_std = 0.31622776601683794;  // sqrt(0.1), the latent prior scale
  std::uint64_t seed = 0;

  void validate() const;
};

// Reconstruction error plus beta times the negated mean predictive
// log-likelihood of the decoded weights; both terms averaged over the batch.
template <class S, class Model>
S pcae_loss_core(const Mapping& encoder, const Mapping& decoder, const VectorX<S>& theta, const VectorX<S>& phi,
                 const MatrixXd& snapshots, const MatrixXd& noise, const Model& target, const MatrixXd& x,
                 const MatrixXd& y, double sigma_y, double beta) {
  require(snapshots.rows() > 0, "pcae loss needs at least one snapshot");
  require(noise.rows() == snapshots.rows() && noise.cols() == snapshots.cols(),
          "pcae loss: noise draws must match the snapshot batch");
  require(beta >= 0.0, "pcae loss: beta must be non-negative, got ", beta);
  require(x.rows() == y.rows(), "pcae loss: x and y row counts differ");
  const double inv_b = 1.0 / static_cast<double>(snapshots.rows());
  const double inv_n = x.rows() > 0 ? 1.0 / static_cast<double>(x.rows()) : 0.0;
  S loss(0.0);
  for (Index b = 0; b < snapshots.rows(); ++b) {
    const VectorX<S> w = lift<S>(snapshots.row(b).transpose());
    const VectorX<S> corrupted = lift<S>((snapshots.row(b) + noise.row(b)).transpose());
    const VectorX<S> code = encoder.apply(theta, corrupted);
    const VectorX<S> rebuilt = decoder.apply(phi, code);
    loss += inv_b * squared_diff_norm(w, rebuilt);
    if (beta > 0.0 && x.rows() > 0) {
      S ll(0.0);
      for (Index n = 0; n < x.rows(); ++n) {
        const VectorX<S> pred = target.template predict<S>(rebuilt, lift<S>(x.row(n).transpose()));
        ll += gaussian_log_density(lift<S>(y.row(n).transpose()), pred, sigma_y);
      }
      loss += (-beta * inv_b * inv_n) * ll;
    }
  }
  return loss;
}

// Double-precision entry point matching the stored autoencoder.
double pcae_loss(const AutoencoderParams& ae, const Architecture& target, const MatrixXd& snapshots,
                 const MatrixXd& noise, const Dataset& train, const ObservationModel& obs, double beta);

struct PcaeResult {
  AutoencoderParams params;
  double recon_mse = 0.0;      // mean squared reconstruction error per weight entry, noise-free
  double decoded_train_ll = 0.0;  // mean per-point log-lik of decoded snapshots
  int iterations_run = 0;
};

PcaeResult train_pcae(const SnapshotSet& snapshots, const Splits& splits, const Architecture& target,
                      const ObservationModel& obs, const Mapping& encoder, const Mapping& decoder,
                      const PcaeConfig& cfg);

// Fresh parameters for a mapping, unit j drawn iid N(0, 1/(fan_in+1)).
VectorXd init_mapping_params(const Mapping& m, Rng& rng);

// Rigid reparametrization of the latent space: shifts/scales codes to mean
// zero and std target_std per dimension by folding the inverse transform into
// the decoder input layer (and the transform into the encoder output layer).
// The composed map decoder(encoder(.)) is unchanged.
void standardize_latent_codes(AutoencoderParams& ae, const MatrixXd& snapshot_weights, double target_std);

// Noise-free diagnostics on a snapshot set.
double reconstruction_mse(const AutoencoderParams& ae, const MatrixXd& snapshot_weights);
double decoded_loglik(const AutoencoderParams& ae, const Architecture& target, const MatrixXd& snapshot_weights,
                      const Dataset& data, const ObservationModel& obs);

}  // namespace projbnn

#pragma once

#include <cstdint>
#include <string>

#include "projbnn/dataset.hpp"
#include "projbnn/metrics.hpp"
#include "projbnn/models.hpp"
#include "projbnn/optim.hpp"

namespace projbnn {

struct FgeConfig {
  double map_lr = 0.001;
  int map_iterations = 5000;
  double lr_max = 0.01;
  double lr_min = 0.0001;
  int cycle_epochs = 10;
  int snapshots = 500;  // one snapshot per cycle
  int keep_top_k = 150;
  int batch_size = 128;
  bool map_use_adam = true;
  bool cycles_use_adam = false;
  std::uint64_t seed = 0;

  void validate() const;
};

// Weight snapshots harvested along the training trajectory, one row each,
// tagged with the validation RMSE reached at snapshot time.
struct SnapshotSet {
  MatrixXd weights;     // R x D_w
  VectorXd valid_rmse;  // R
  std::uint64_t arch_fingerprint = 0;
};

// Per-step learning rate inside one cycle: linear descent from lr_max at
// t = 0 to lr_min at t = steps_per_cycle - 1.
double cyclic_lr(int t, int steps_per_cycle, double lr_max, double lr_min);

template <class Model>
MatrixXd predict_dataset(const Model& model, const VectorXd& w, const MatrixXd& x) {
  MatrixXd out(x.rows(), model.output_dim());
  for (Index r = 0; r < x.rows(); ++r) {
    const VectorXd xi = x.row(r).transpose();
    out.row(r) = model.template predict<double>(w, xi).transpose();
  }
  return out;
}

// Adam ascent on the mini-batch log joint. Generic over the model so the
// closed-form linear regressor can exercise the same code path as MLPs.
template <class Model>
VectorXd train_map_core(const Model& model, VectorXd w, const Dataset& train, double sigma_y, double prior_std,
                        const FgeConfig& cfg) {
  cfg.validate();
  train.validate();
  require(w.size() == model.param_count(), "train_map: init has ", w.size(), " entries, model expects ", model.param_count());
  Adam adam(AdamConfig{cfg.map_lr}, w.size());
  Sgd sgd(cfg.map_lr);
  BatchStream batches(train.n(), cfg.batch_size, substream(cfg.seed, "map.batch"));
  ad::GradientWorkspace ws;
  VectorXd grad;
  const double n_total = static_cast<double>(train.n());
  for (int it = 0; it < cfg.map_iterations; ++it) {
    const Dataset batch = train.take(batches.next());
    try {
      ws.value_and_grad(
          [&](const VectorX<ad::Var>& p) {
            return log_joint_minibatch<Model, ad::Var>(model, p, batch.x, batch.y, n_total, sigma_y, prior_std);
          },
          w, grad);
    } catch (const ad::NonFiniteError& e) {
      throw std::runtime_error(cat("map training diverged at iteration ", it, ": ", e.what()));
    }
    grad = -grad;
    if (cfg.map_use_adam)
      adam.step(w, grad);
    else
      sgd.step(w, grad);
  }
  return w;
}

// Cyclic-learning-rate exploration from a trained start; snapshots the
// weights at the end of every cycle (the low-rate point).
template <class Model>
SnapshotSet collect_fge_core(const Model& model, const VectorXd& start, const Splits& splits, double sigma_y,
                             double prior_std, const FgeConfig& cfg) {
  cfg.validate();
  splits.train.validate();
  splits.valid.validate();
  require(start.size() == model.param_count(), "collect_fge: start has ", start.size(), " entries, model expects ", model.param_count());

  VectorXd w = start;
  BatchStream batches(splits.train.n(), cfg.batch_size, substream(cfg.seed, "fge.batch"));
  const int steps_per_cycle = cfg.cycle_epochs * static_cast<int>(batches.batches_per_epoch());
  Adam adam(AdamConfig{cfg.lr_max}, w.size());
  Sgd sgd(cfg.lr_max);
  ad::GradientWorkspace ws;
  VectorXd grad;
  const double n_total = static_cast<double>(splits.train.n());

  SnapshotSet out;
  out.weights.resize(cfg.snapshots, w.size());
  out.valid_rmse.resize(cfg.snapshots);
  for (int r = 0; r < cfg.snapshots; ++r) {
    for (int t = 0; t < steps_per_cycle; ++t) {
      const double lr = cyclic_lr(t, steps_per_cycle, cfg.lr_max, cfg.lr_min);
      const Dataset batch = splits.train.take(batches.next());
      try {
        ws.value_and_grad(
            [&](const VectorX<ad::Var>& p) {
              return log_joint_minibatch<Model, ad::Var>(model, p, batch.x, batch.y, n_total, sigma_y, prior_std);
            },
            w, grad);
      } catch (const ad::NonFiniteError& e) {
        throw std::runtime_error(
            cat("snapshot collection diverged in cycle ", r, ", step ", t, ": ", e.what()));
      }
      grad = -grad;
      if (cfg.cycles_use_adam) {
        adam.set_lr(lr);
        adam.step(w, grad);
      } else {
        sgd.set_lr(lr);
        sgd.step(w, grad);
      }
    }
    out.weights.row(r) = w.transpose();
    out.valid_rmse[r] = rmse(predict_dataset(model, w, splits.valid.x), splits.valid.y);
  }
  return out;
}

// Architecture-level entry points used by the pipeline.
WeightVector train_map(const Architecture& arch, const Splits& splits, const ObservationModel& obs, double prior_std,
                       const FgeConfig& cfg);
SnapshotSet collect_fge_snapshots(const Architecture& arch, const WeightVector& start, const Splits& splits,
                                  const ObservationModel& obs, double prior_std, const FgeConfig& cfg);

// Keeps the k snapshots with the lowest validation RMSE, ties broken by
// original position; result rows are sorted by ascending RMSE.
SnapshotSet filter_top_k(const SnapshotSet& s, int k);

void save_snapshots_csv(const SnapshotSet& s, const std::string& path);
SnapshotSet load_snapshots_csv(const std::string& path, const Architecture& arch);

// Layer-wise random initialization, unit j of layer l drawn iid
// N(0, 1/(fan_in+1)). Shared by MAP training and the projection/VI stages.
VectorXd default_init(const Architecture& arch, Rng& rng);

}  // namespace projbnn

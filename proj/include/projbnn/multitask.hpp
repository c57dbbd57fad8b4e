#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "projbnn/vi.hpp"

namespace projbnn {

// A family of related regression tasks fit jointly: each task keeps its own
// latent code while all tasks share one decoder.
struct TaskSet {
  std::vector<Dataset> tasks;
  Architecture target_arch;

  Index task_count() const { return static_cast<Index>(tasks.size()); }
  void validate() const;
};

// Independent random splits, one substream per task.
std::vector<Splits> split_tasks(const TaskSet& ts, const SplitSpec& spec);

// Monte Carlo objective over M tasks: per-task likelihood terms draw z_m from
// the task's own factor and phi from the shared one; the shared KL enters
// once. eps columns follow [z_1 .. z_M, phi].
double elbo_meta(const std::vector<MeanFieldGaussian>& q_z, const MeanFieldGaussian& q_phi,
                 const Mapping& decoder, const Architecture& target, const std::vector<TaskBatch>& batches,
                 const ObservationModel& obs, const PriorSpec& prior, const MatrixXd& eps);

// Decoder used when none is configured: one hidden layer of 50 tanh units.
Mapping default_meta_decoder(Index latent_dim, Index weight_dim);

// Joint fit of every per-task latent factor and the shared decoder factor.
// The decoder mean starts from a fresh random draw (no projection
// pretraining); early stopping pools validation likelihood over tasks.
VIFit train_meta(const Architecture& target, const Mapping& decoder, const std::vector<Splits>& tasks,
                 const ObservationModel& obs, const PriorSpec& prior, const VarInferenceConfig& cfg);

// Functions decoded over a regular traversal of the latent plane: interior
// quantiles (i + 1/2)/n per axis, mapped through the standard normal inverse
// CDF and decoded with the shared mean decoder parameters.
struct LatentGrid {
  MatrixXd quantiles;  // n^2 x 2, (u, v)
  MatrixXd codes;      // n^2 x 2, (z0, z1)
  MatrixXd functions;  // n^2 x |x grid|
};

LatentGrid latent_grid_decode(const VectorXd& phi_mean, const Mapping& decoder, const Architecture& target,
                              int grid_n, const VectorXd& x_grid);

// Columns u, v, z0, z1, f_0 .. f_{K-1}; one row per grid cell.
void save_latent_grid_csv(const LatentGrid& grid, const std::string& path);

}  // namespace projbnn

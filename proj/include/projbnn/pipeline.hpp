#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "projbnn/artifacts.hpp"
#include "projbnn/config.hpp"
#include "projbnn/generators.hpp"
#include "projbnn/multitask.hpp"

namespace projbnn {

// Dataset resolved from a config: generated or loaded, normalized to model
// units where applicable, split, and paired with its target network.
struct PreparedData {
  std::string label;
  Architecture target;
  Dataset data;  // model units; pooled across tasks for sine
  Splits splits;
  NormStats norm_stats;
  bool normalized = false;
  std::vector<std::vector<int>> mode_rows;  // four-modes only, rows into `data`
  std::vector<Dataset> tasks;               // sine only
  std::vector<Splits> task_splits;
};

PreparedData prepare_data(const RunConfig& cfg);

// Writes one CSV per task plus a manifest with amplitudes, phases and paths.
void save_sine_tasks(const SineTasks& st, const std::string& dir);

// Snapshot harvesting; four-modes runs one chain per mode, each trained to a
// MAP point with one mode held out so the chains land in distinct basins.
SnapshotSet run_fge_stage(const PreparedData& pd, const RunConfig& cfg, std::ostream& log);

PcaeResult run_pcae_stage(const SnapshotSet& snaps, const PreparedData& pd, const RunConfig& cfg, int latent_dim,
                          std::ostream& log);

// One variational fit for the given grid cell. `ae` is required for projbnn,
// linear and qz_only; one_stage, bbb and meta ignore it (may be null).
VIFit run_vi_stage(Method method, const PreparedData& pd, const AutoencoderParams* ae, const RunConfig& cfg,
                   int latent_dim, double lr, std::ostream& log);

// Pooled validation marginal log-likelihood used for grid selection; common
// random numbers across cells (fresh "stage.select" substream per call).
double selection_valid_ll(const ModelArtifact& m, const PreparedData& pd, const RunConfig& cfg);

// Test metrics, mode coverage when descriptors exist, and a predictive-band
// CSV for scalar-input targets (empty path skips it). Wall clock is left 0.
MetricsDoc run_eval_stage(const ModelArtifact& m, const PreparedData& pd, const RunConfig& cfg, int eval_samples,
                          const std::string& bands_path, std::ostream& log);

struct PipelineResult {
  MetricsDoc metrics;
  ModelArtifact model;
  int latent_dim = 0;  // chosen grid cell
  double lr = 0.0;
  double valid_ll = 0.0;
};

// Full run: data, stages per the method, grid selection on validation
// marginal LL (ties toward smaller latent dim, then smaller lr), evaluation.
// Artifacts land under cfg.out_dir; any failure leaves a FAILED marker there.
PipelineResult run_pipeline(const RunConfig& cfg, std::ostream& log);

}  // namespace projbnn

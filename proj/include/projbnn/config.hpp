#pragma once

#include <string>
#include <vector>

#include "projbnn/autoencoder.hpp"
#include "projbnn/dataset.hpp"
#include "projbnn/ensemble.hpp"
#include "projbnn/vi.hpp"

namespace projbnn {

enum class Method { projbnn, bbb, linear, one_stage, qz_only, meta };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

// Data source: a seeded generator or a CSV file. Sizes apply per kind.
struct DataConfig {
  std::string kind = "toy-rbf";  // toy-rbf | four-modes | sine | csv
  std::string path;              // csv only
  int n = 200;                   // toy-rbf rows
  int per_mode = 40;             // four-modes rows per cluster
  int tasks = 8;                 // sine task count
  int per_task = 40;             // sine rows per task

  void validate() const;
};

struct EvalConfig {
  int samples = 500;
  double band_low = 0.05;
  double band_high = 0.95;
  double coverage_threshold_sigmas = 3.0;  // mode fit threshold, in units of sigma_y
  int grid_points = 200;                   // band grid resolution over the input range

  void validate() const;
};

// Complete declarative description of a run. Defaults reproduce the reference
// training settings; `scale` shrinks the iteration and snapshot budgets
// proportionally for desk-scale runs.
struct RunConfig {
  DataConfig dataset;
  SplitSpec split;
  Architecture target;  // empty layer list: resolved from the generator
  FgeConfig fge;
  PcaeConfig pcae;
  VarInferenceConfig vi;
  Method method = Method::projbnn;
  std::vector<int> latent_grid = {2, 10, 50, 100};
  std::vector<double> lr_grid = {0.1, 0.01, 0.001, 0.0001};
  EvalConfig eval;
  double sigma_y = 0.1;
  double prior_variance = 0.1;
  int map_restarts = 0;  // 0: one chain, except four-modes which gets one per mode
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  double scale = 1.0;

  void validate() const;
};

// Strict parse: unknown keys anywhere are rejected; absent keys keep defaults.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

// Iteration and snapshot budgets multiplied by cfg.scale (minimum 1 each);
// returns the config with scale folded in and reset to 1.
RunConfig apply_scale(RunConfig cfg);

}  // namespace projbnn

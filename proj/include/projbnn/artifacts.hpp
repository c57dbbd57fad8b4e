#pragma once

#include <optional>
#include <string>

#include "projbnn/autoencoder.hpp"
#include "projbnn/dataset.hpp"
#include "projbnn/vi.hpp"

namespace projbnn {

// Stored documents are JSON with a schema_version plus a kind tag; loaders
// reject version or kind mismatches and unknown keys.
inline constexpr int kSchemaVersion = 1;

void save_autoencoder(const AutoencoderParams& ae, const std::string& path);
AutoencoderParams load_autoencoder(const std::string& path);

// A fitted posterior bundled with the network it predicts with, so evaluation
// needs no access to the training run.
struct ModelArtifact {
  Architecture target;
  VIFit fit;
};

void save_model(const ModelArtifact& m, const std::string& path);
ModelArtifact load_model(const std::string& path);

struct MetricsDoc {
  std::string method;
  std::string dataset;
  SplitKind split_kind = SplitKind::random;
  std::uint64_t seed = 0;
  int eval_samples = 0;
  double marginal_test_ll = 0.0;
  double test_rmse = 0.0;
  std::optional<int> mode_coverage;
  double wall_clock_seconds = 0.0;
};

void save_metrics(const MetricsDoc& m, const std::string& path);
MetricsDoc load_metrics(const std::string& path);

}  // namespace projbnn

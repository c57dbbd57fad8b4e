#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "projbnn/common.hpp"

namespace projbnn {

// Row-per-observation regression data; x is N x Dx, y is N x Dy.
struct Dataset {
  MatrixXd x;
  MatrixXd y;

  Index n() const { return x.rows(); }
  Index x_dim() const { return x.cols(); }
  Index y_dim() const { return y.cols(); }

  void validate() const;
  Dataset take(const std::vector<int>& rows) const;
};

// Per-column location/scale computed on training data (population std).
struct NormStats {
  VectorXd x_mean, x_std, y_mean, y_std;
};

NormStats compute_norm_stats(const Dataset& d);
Dataset apply_norm(const Dataset& d, const NormStats& s);

// Normalizes in place against the dataset's own statistics.
struct Normalized {
  Dataset data;
  NormStats stats;
};
Normalized normalize(const Dataset& d);

// random: seeded permutation. extrapolation: the 5% largest plus 5% smallest
// input-norm rows form the test set. interpolation: those extremes are forced
// into train and the test set is drawn from the middle instead.
enum class SplitKind { random, extrapolation, interpolation };

std::string to_string(SplitKind k);
SplitKind split_kind_from_string(const std::string& s);

struct SplitSpec {
  SplitKind kind = SplitKind::random;
  double train_frac = 0.8;
  double valid_frac = 0.1;  // test gets the remainder
  std::uint64_t seed = 0;
};

struct Splits {
  Dataset train, valid, test;
};

// Row split; requires at least 20 rows and non-empty parts.
Splits split(const Dataset& d, const SplitSpec& spec);

// CSV with header x_0,...,x_{Dx-1},y_0,...,y_{Dy-1}; cells round-trip exactly.
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& d, const std::string& path);

}  // namespace projbnn

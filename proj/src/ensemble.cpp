#include "projbnn/ensemble.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>

namespace projbnn {

void FgeConfig::validate() const {
  require(map_lr > 0.0, "map learning rate must be positive, got ", map_lr);
  require(map_iterations >= 0, "map iteration count must be non-negative, got ", map_iterations);
  require(lr_min > 0.0 && lr_max >= lr_min, "cyclic learning rates need lr_max >= lr_min > 0, got ", lr_max, " and ", lr_min);
  require(cycle_epochs > 0, "cycle length must be positive, got ", cycle_epochs);
  require(snapshots > 0, "snapshot count must be positive, got ", snapshots);
  require(keep_top_k > 0 && keep_top_k <= snapshots, "keep_top_k must be in [1, ", snapshots, "], got ", keep_top_k);
  require(batch_size > 0, "batch size must be positive, got ", batch_size);
}

double cyclic_lr(int t, int steps_per_cycle, double lr_max, double lr_min) {
  require(steps_per_cycle >= 2, "cyclic_lr needs at least 2 steps per cycle, got ", steps_per_cycle);
  require(t >= 0 && t < steps_per_cycle, "cyclic_lr step ", t, " outside [0, ", steps_per_cycle, ")");
  require(lr_min > 0.0 && lr_max >= lr_min, "cyclic_lr needs lr_max >= lr_min > 0, got ", lr_max, " and ", lr_min);
  // Convex combination, so both endpoints are hit exactly.
  const double frac = static_cast<double>(t) / static_cast<double>(steps_per_cycle - 1);
  return lr_max * (1.0 - frac) + lr_min * frac;
}

VectorXd default_init(const Architecture& arch, Rng& rng) {
  arch.validate();
  VectorXd w(arch.param_count());
  Index offset = 0;
  for (std::size_t l = 0; l + 1 < arch.layer_sizes.size(); ++l) {
    const Index fan_in = arch.layer_sizes[l], fan_out = arch.layer_sizes[l + 1];
    const double sd = 1.0 / std::sqrt(static_cast<double>(fan_in + 1));
    for (Index i = 0; i < (fan_in + 1) * fan_out; ++i) w[offset + i] = sd * rng.normal();
    offset += (fan_in + 1) * fan_out;
  }
  return w;
}

WeightVector train_map(const Architecture& arch, const Splits& splits, const ObservationModel& obs, double prior_std,
                       const FgeConfig& cfg) {
  obs.validate();
  require(prior_std > 0.0, "prior std must be positive, got ", prior_std);
  const MlpModel model{arch};
  Rng init_rng = substream(cfg.seed, "map.init");
  VectorXd w = default_init(arch, init_rng);
  w = train_map_core(model, std::move(w), splits.train, obs.sigma_y, prior_std, cfg);
  return make_weight_vector(arch, std::move(w));
}

SnapshotSet collect_fge_snapshots(const Architecture& arch, const WeightVector& start, const Splits& splits,
                                  const ObservationModel& obs, double prior_std, const FgeConfig& cfg) {
  check_compatible(arch, start);
  obs.validate();
  require(prior_std > 0.0, "prior std must be positive, got ", prior_std);
  const MlpModel model{arch};
  SnapshotSet out = collect_fge_core(model, start.values, splits, obs.sigma_y, prior_std, cfg);
  out.arch_fingerprint = arch.fingerprint();
  return out;
}

SnapshotSet filter_top_k(const SnapshotSet& s, int k) {
  require(s.weights.rows() == s.valid_rmse.size(), "snapshot set has ", s.weights.rows(), " rows but ", s.valid_rmse.size(), " rmse entries");
  require(k > 0 && k <= s.weights.rows(), "filter_top_k: k=", k, " outside [1, ", s.weights.rows(), "]");
  std::vector<Index> order(static_cast<std::size_t>(s.weights.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return s.valid_rmse[a] < s.valid_rmse[b]; });
  SnapshotSet out;
  out.arch_fingerprint = s.arch_fingerprint;
  out.weights.resize(k, s.weights.cols());
  out.valid_rmse.resize(k);
  for (int i = 0; i < k; ++i) {
    out.weights.row(i) = s.weights.row(order[static_cast<std::size_t>(i)]);
    out.valid_rmse[i] = s.valid_rmse[order[static_cast<std::size_t>(i)]];
  }
  return out;
}

void save_snapshots_csv(const SnapshotSet& s, const std::string& path) {
  require(s.weights.rows() > 0, "refusing to write an empty snapshot set");
  require(s.weights.rows() == s.valid_rmse.size(), "snapshot rows and rmse entries differ");
  std::ofstream out(path);
  require(out.good(), "snapshots: cannot write '", path, "'");
  out << "valid_rmse";
  for (Index c = 0; c < s.weights.cols(); ++c) out << ",w_" << c;
  out << "\n";
  for (Index r = 0; r < s.weights.rows(); ++r) {
    out << format_double(s.valid_rmse[r]);
    for (Index c = 0; c < s.weights.cols(); ++c) out << "," << format_double(s.weights(r, c));
    out << "\n";
  }
  require(out.good(), "snapshots: write to '", path, "' failed");
}

SnapshotSet load_snapshots_csv(const std::string& path, const Architecture& arch) {
  std::ifstream in(path);
  require(in.good(), "snapshots: cannot open '", path, "'");
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "snapshots: '", path, "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const Index d_w = arch.param_count();
  {
    std::string expect = "valid_rmse";
    for (Index c = 0; c < d_w; ++c) expect += cat(",w_", c);
    require(line == expect, "snapshots: header of '", path, "' does not match the architecture (", d_w,
                                " weights expected)");
  }
  std::vector<VectorXd> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    VectorXd row(d_w + 1);
    const char* ptr = line.data();
    const char* end = ptr + line.size();
    for (Index c = 0; c <= d_w; ++c) {
      if (c > 0) {
        if (ptr >= end || *ptr != ',')
          throw std::invalid_argument(cat("snapshots: row ", line_no, " of '", path, "' is too short"));
        ++ptr;
      }
      double v = 0.0;
      const auto res = std::from_chars(ptr, end, v);
      if (res.ec != std::errc{})
        throw std::invalid_argument(cat("snapshots: bad number at row ", line_no, ", column ", c, " of '", path, "'"));
      ptr = res.ptr;
      row[c] = v;
    }
    require(ptr == end, "snapshots: row ", line_no, " of '", path, "' has trailing data");
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), "snapshots: '", path, "' has no data rows");

  SnapshotSet s;
  s.arch_fingerprint = arch.fingerprint();
  s.weights.resize(static_cast<Index>(rows.size()), d_w);
  s.valid_rmse.resize(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    s.valid_rmse[static_cast<Index>(r)] = rows[r][0];
    s.weights.row(static_cast<Index>(r)) = rows[r].tail(d_w).transpose();
  }
  return s;
}

}  // namespace projbnn

#include "projbnn/multitask.hpp"

#include <fstream>

namespace projbnn {

void TaskSet::validate() const {
  require(!tasks.empty(), "task set is empty");
  target_arch.validate();
  for (std::size_t m = 0; m < tasks.size(); ++m) {
    tasks[m].validate();
    require(tasks[m].x_dim() == target_arch.input_dim() && tasks[m].y_dim() == target_arch.output_dim(),
            "task ", m, " data is ", tasks[m].x_dim(), " -> ", tasks[m].y_dim(), ", network expects ",
            target_arch.input_dim(), " -> ", target_arch.output_dim());
  }
}

std::vector<Splits> split_tasks(const TaskSet& ts, const SplitSpec& spec) {
  ts.validate();
  std::vector<Splits> out;
  out.reserve(ts.tasks.size());
  for (std::size_t m = 0; m < ts.tasks.size(); ++m) {
    SplitSpec per = spec;
    per.seed = splitmix64(spec.seed) ^ fnv1a(cat("task.", m));
    out.push_back(split(ts.tasks[m], per));
  }
  return out;
}

double elbo_meta(const std::vector<MeanFieldGaussian>& q_z, const MeanFieldGaussian& q_phi,
                 const Mapping& decoder, const Architecture& target, const std::vector<TaskBatch>& batches,
                 const ObservationModel& obs, const PriorSpec& prior, const MatrixXd& eps) {
  obs.validate();
  prior.validate();
  decoder.validate();
  target.validate();
  require(!q_z.empty(), "meta objective needs at least one task factor");
  require(q_z.size() == batches.size(), "got ", q_z.size(), " task factors for ", batches.size(), " batches");
  for (const MeanFieldGaussian& q : q_z) q.validate();
  q_phi.validate();
  require(q_phi.size() == decoder.param_count() || (q_phi.size() == 0 && decoder.param_count() == 0),
          "decoder factor has ", q_phi.size(), " entries, decoder expects ", decoder.param_count());
  const MlpModel model{target};
  std::vector<VectorXd> mu_z(q_z.size());
  std::vector<VectorXd> log_std_z(q_z.size());
  for (std::size_t m = 0; m < q_z.size(); ++m) {
    mu_z[m] = q_z[m].mu;
    log_std_z[m] = q_z[m].log_std;
  }
  return elbo_core<double>(decoder, model, batches, mu_z, log_std_z, q_phi.mu, q_phi.log_std, VectorXd(0),
                           eps, obs.sigma_y, prior);
}

Mapping default_meta_decoder(Index latent_dim, Index weight_dim) {
  Architecture net;
  net.layer_sizes = {static_cast<int>(latent_dim), 50, static_cast<int>(weight_dim)};
  net.activation = Activation::tanh;
  return Mapping::mlp_map(net);
}

VIFit train_meta(const Architecture& target, const Mapping& decoder, const std::vector<Splits>& tasks,
                 const ObservationModel& obs, const PriorSpec& prior, const VarInferenceConfig& cfg) {
  target.validate();
  decoder.validate();
  const MlpModel model{target};
  Rng mu_rng = substream(cfg.seed, "vi.init.phi_mu");
  const VectorXd phi_mu = init_mapping_params(decoder, mu_rng);
  VIFit fit = train_vi_core(decoder, model, tasks, obs, prior, cfg, PhiMode::variational, phi_mu);
  fit.method = "meta";
  return fit;
}

LatentGrid latent_grid_decode(const VectorXd& phi_mean, const Mapping& decoder, const Architecture& target,
                              int grid_n, const VectorXd& x_grid) {
  decoder.validate();
  target.validate();
  require(decoder.in_dim == 2, "latent traversal expects a 2-D code, decoder reads ", decoder.in_dim);
  require(decoder.out_dim == target.param_count(), "decoder emits ", decoder.out_dim,
          " weights, network expects ", target.param_count());
  require(phi_mean.size() == decoder.param_count(), "decoder parameters have ", phi_mean.size(),
          " entries, decoder expects ", decoder.param_count());
  require(phi_mean.allFinite(), "decoder parameters contain non-finite values");
  require(target.input_dim() == 1 && target.output_dim() == 1,
          "latent traversal assumes a scalar-in, scalar-out network");
  require(grid_n >= 2, "grid needs at least two cells per axis, got ", grid_n);
  require(x_grid.size() >= 1, "x grid is empty");

  const Index cells = static_cast<Index>(grid_n) * grid_n;
  LatentGrid g;
  g.quantiles.resize(cells, 2);
  g.codes.resize(cells, 2);
  g.functions.resize(cells, x_grid.size());
  VectorXd z(2);
  VectorXd xv(1);
  Index r = 0;
  for (int i = 0; i < grid_n; ++i) {
    const double u = (i + 0.5) / grid_n;
    for (int j = 0; j < grid_n; ++j, ++r) {
      const double v = (j + 0.5) / grid_n;
      z << inv_std_normal_cdf(u), inv_std_normal_cdf(v);
      g.quantiles.row(r) << u, v;
      g.codes.row(r) = z.transpose();
      const VectorXd w = decoder.apply<double>(phi_mean, z);
      for (Index k = 0; k < x_grid.size(); ++k) {
        xv[0] = x_grid[k];
        g.functions(r, k) = mlp_forward(target, w, xv)[0];
      }
    }
  }
  return g;
}

void save_latent_grid_csv(const LatentGrid& grid, const std::string& path) {
  require(grid.quantiles.rows() == grid.codes.rows() && grid.codes.rows() == grid.functions.rows(),
          "latent grid blocks disagree on row count");
  require(grid.quantiles.cols() == 2 && grid.codes.cols() == 2, "latent grid blocks must have two columns");
  std::ofstream out(path);
  require(out.good(), "csv: cannot write '", path, "'");
  out << "u,v,z0,z1";
  for (Index k = 0; k < grid.functions.cols(); ++k) out << ",f_" << k;
  out << "\n";
  for (Index r = 0; r < grid.functions.rows(); ++r) {
    out << format_double(grid.quantiles(r, 0)) << "," << format_double(grid.quantiles(r, 1)) << ","
        << format_double(grid.codes(r, 0)) << "," << format_double(grid.codes(r, 1));
    for (Index k = 0; k < grid.functions.cols(); ++k) out << "," << format_double(grid.functions(r, k));
    out << "\n";
  }
  require(out.good(), "csv: write to '", path, "' failed");
}

}  // namespace projbnn

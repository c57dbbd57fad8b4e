#include "projbnn/generators.hpp"

#include <cmath>
#include <numbers>

#include "projbnn/models.hpp"
#include "projbnn/rng.hpp"

namespace projbnn {

ToyLatentRbf gen_toy_latent_rbf(std::uint64_t seed, int n) {
  require(n >= 20, "toy latent rbf generator needs n >= 20, got ", n);
  ToyLatentRbf out;
  out.arch.layer_sizes = {1, 20, 1};
  out.arch.activation = Activation::rbf;
  out.arch.rbf_center = 0.0;
  out.arch.rbf_lengthscale = 1.0;

  Rng rng = substream(seed, "gen.toy-rbf");
  out.latent = Eigen::Vector2d(rng.normal(), rng.normal());
  const Index d_w = out.arch.param_count();
  const MatrixXd lin_map = rng.normal_matrix(d_w, 2);
  out.true_weights = lin_map * out.latent;

  const MlpModel model{out.arch};
  out.data.x.resize(n, 1);
  out.data.y.resize(n, 1);
  for (int i = 0; i < n; ++i) {
    // non-uniform inputs: two dense side bands, nothing in the gap
    const double x = (i % 2 == 0) ? rng.uniform(-2.0, out.gap_lo) : rng.uniform(out.gap_hi, 2.0);
    const VectorXd xin = VectorXd::Constant(1, x);
    const double f = model.predict<double>(out.true_weights, xin)[0];
    out.data.x(i, 0) = x;
    out.data.y(i, 0) = f + 0.1 * rng.normal();
  }
  out.data.validate();
  return out;
}

FourModes gen_toy_four_modes(std::uint64_t seed, int per_mode) {
  require(per_mode >= 5, "four modes generator needs per_mode >= 5, got ", per_mode);
  FourModes out;
  out.target_arch.layer_sizes = {1, 3, 1};
  out.target_arch.activation = Activation::rbf;
  out.target_arch.rbf_center = 0.0;
  out.target_arch.rbf_lengthscale = 1.0;

  // Each mode traces a full Gaussian bump, sampled wide enough that a constant
  // cannot stand in for the shape. One hidden unit contributes exactly one
  // bump, so three units track at most three of the four modes.
  const double centers[4] = {-4.5, -1.5, 1.5, 4.5};
  const double amplitudes[4] = {2.4, -2.4, 2.4, -2.4};
  const double width = 0.75, half_window = 1.4;
  Rng rng = substream(seed, "gen.four-modes");

  const int n = 4 * per_mode;
  out.data.x.resize(n, 1);
  out.data.y.resize(n, 1);
  out.modes.resize(4);
  for (int m = 0; m < 4; ++m) {
    out.modes[m].x_center = centers[m];
    out.modes[m].amplitude = amplitudes[m];
    for (int i = 0; i < per_mode; ++i) {
      const int row = m * per_mode + i;
      const double u = rng.uniform(-half_window, half_window);
      out.data.x(row, 0) = centers[m] + u;
      out.data.y(row, 0) = amplitudes[m] * std::exp(-u * u / (2.0 * width * width)) + 0.05 * rng.normal();
      out.modes[m].rows.push_back(row);
    }
  }
  out.data.validate();
  return out;
}

SineTasks gen_sine_tasks(int n_tasks, int per_task, std::uint64_t seed) {
  require(n_tasks >= 1, "sine task generator needs at least one task, got ", n_tasks);
  require(per_task >= 20, "sine task generator needs per_task >= 20, got ", per_task);
  SineTasks out;
  out.amplitude.resize(n_tasks);
  out.phase.resize(n_tasks);
  Rng rng = substream(seed, "gen.sine-tasks");
  for (int m = 0; m < n_tasks; ++m) {
    out.phase[m] = n_tasks == 1 ? 0.0
                                : 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(n_tasks - 1);
    out.amplitude[m] = rng.uniform(-3.0, 3.0);
    Dataset d;
    d.x.resize(per_task, 1);
    d.y.resize(per_task, 1);
    for (int i = 0; i < per_task; ++i) {
      const double x = rng.uniform(-4.0, 4.0);
      d.x(i, 0) = x;
      d.y(i, 0) = out.amplitude[m] * std::sin(x + out.phase[m]) + 0.1 * rng.normal();
    }
    d.validate();
    out.tasks.push_back(std::move(d));
  }
  return out;
}

}  // namespace projbnn

#pragma once

#include <cstdint>
#include <vector>

#include "projbnn/dataset.hpp"
#include "projbnn/network.hpp"

namespace projbnn {

// 1-D regression data whose true function is an RBF network with weights that
// are an exact linear image of a 2-D latent code. Inputs leave a gap in the
// middle of the range so interpolation uncertainty is observable.
struct ToyLatentRbf {
  Dataset data;  // raw units
  Architecture arch;
  VectorXd true_weights;
  Eigen::Vector2d latent;
  double gap_lo = -0.5, gap_hi = 0.5;
};

ToyLatentRbf gen_toy_latent_rbf(std::uint64_t seed, int n = 200);

// Four well separated Gaussian bumps. A [1,3,1] RBF network produces one bump
// per hidden unit, so a single weight vector can fit any three of the modes
// but never all four.
struct ModeDescriptor {
  double x_center = 0.0;
  double amplitude = 0.0;  // bump height at the center, sign included
  std::vector<int> rows;
};

struct FourModes {
  Dataset data;  // raw units
  std::vector<ModeDescriptor> modes;
  Architecture target_arch;  // the deliberately under-sized network
};

FourModes gen_toy_four_modes(std::uint64_t seed, int per_mode = 40);

// Family of related regression tasks y = a_m * sin(x + b_m) + noise with
// shared structure across tasks: amplitudes drawn once per task, phases
// equally spaced over [0, 2*pi].
struct SineTasks {
  std::vector<Dataset> tasks;  // raw units
  VectorXd amplitude;
  VectorXd phase;
};

SineTasks gen_sine_tasks(int n_tasks, int per_task, std::uint64_t seed);

}  // namespace projbnn

#pragma once

#include <vector>

#include "projbnn/common.hpp"
#include "projbnn/rng.hpp"

namespace projbnn {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard Adam with bias correction; step() descends along grad.
class Adam {
 public:
  Adam(AdamConfig cfg, Index dim) : cfg_(cfg), m_(VectorXd::Zero(dim)), v_(VectorXd::Zero(dim)) {}

  void set_lr(double lr) { cfg_.lr = lr; }

  void step(VectorXd& params, const VectorXd& grad) {
    ++t_;
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
    v_ = cfg_.beta2 * v_.array().matrix() + (1.0 - cfg_.beta2) * grad.array().square().matrix();
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    params.array() -= cfg_.lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.eps);
  }

 private:
  AdamConfig cfg_;
  VectorXd m_, v_;
  long t_ = 0;
};

class Sgd {
 public:
  explicit Sgd(double lr) : lr_(lr) {}

  void set_lr(double lr) { lr_ = lr; }

  void step(VectorXd& params, const VectorXd& grad) { params -= lr_ * grad; }

 private:
  double lr_;
};

// Epoch-shuffled mini-batch indices; reshuffles whenever an epoch is consumed.
class BatchStream {
 public:
  BatchStream(Index n, int batch_size, Rng rng) : rng_(rng), order_(static_cast<std::size_t>(n)) {
    require(n > 0, "batch stream needs a non-empty dataset");
    require(batch_size > 0, "batch size must be positive, got ", batch_size);
    batch_ = std::min<std::size_t>(static_cast<std::size_t>(batch_size), order_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
    rng_.shuffle(order_);
  }

  const std::vector<int>& next() {
    if (cursor_ >= order_.size()) {
      rng_.shuffle(order_);
      cursor_ = 0;
    }
    const std::size_t take = std::min(batch_, order_.size() - cursor_);
    current_.assign(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                    order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + take));
    cursor_ += take;
    return current_;
  }

  // number of batches one pass over the data takes
  Index batches_per_epoch() const {
    return static_cast<Index>((order_.size() + batch_ - 1) / batch_);
  }

 private:
  Rng rng_;
  std::vector<int> order_;
  std::vector<int> current_;
  std::size_t batch_ = 0;
  std::size_t cursor_ = 0;
};

}  // namespace projbnn

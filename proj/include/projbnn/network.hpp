#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "projbnn/ad.hpp"
#include "projbnn/common.hpp"

namespace projbnn {

enum class Activation { relu, rbf, tanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

// Fully connected net. layer_sizes includes input and output dims; every
// hidden layer uses `activation`, the output layer is linear. Biases are
// carried as an extra row per layer (input augmented with a trailing 1).
struct Architecture {
  std::vector<int> layer_sizes;
  Activation activation = Activation::rbf;
  double rbf_center = 0.0;
  double rbf_lengthscale = 1.0;

  void validate() const;
  Index input_dim() const { return layer_sizes.front(); }
  Index output_dim() const { return layer_sizes.back(); }
  Index param_count() const;
  std::uint64_t fingerprint() const;
};

// Flat parameter vector tagged with the architecture it belongs to.
struct WeightVector {
  VectorXd values;
  std::uint64_t arch_fingerprint = 0;
};

WeightVector make_weight_vector(const Architecture& arch, VectorXd values);
void check_compatible(const Architecture& arch, const WeightVector& w);

double activation_apply(Activation kind, double x, double rbf_center = 0.0, double rbf_lengthscale = 1.0);

template <class S>
S apply_activation(Activation kind, const S& x, double center, double lengthscale) {
  using std::exp;
  using std::tanh;
  switch (kind) {
    case Activation::relu:
      return x > S(0.0) ? x : S(0.0);
    case Activation::tanh:
      return tanh(x);
    case Activation::rbf: {
      const S t = (x - center) / lengthscale;
      return exp(-(t * t));
    }
  }
  throw std::invalid_argument("unknown activation");
}

// Shared by MLP layers and standalone affine maps: one output unit j owns the
// contiguous block w[offset + j*(fan_in+1) ... ], bias last.
template <class S>
VectorX<S> affine_layer(const VectorX<S>& w, Index offset, Index fan_in, Index fan_out, const VectorX<S>& input) {
  VectorX<S> out(fan_out);
  for (Index j = 0; j < fan_out; ++j) {
    const Index base = offset + j * (fan_in + 1);
    out[j] = dot(w.segment(base, fan_in), input) + w[base + fan_in];
  }
  return out;
}

template <class S>
VectorX<S> mlp_forward(const Architecture& arch, const VectorX<S>& w, const VectorX<S>& x) {
  arch.validate();
  require(x.size() == arch.input_dim(), "mlp_forward: input has ", x.size(), " dims, architecture expects ", arch.input_dim());
  require(w.size() == arch.param_count(), "mlp_forward: weight vector has ", w.size(), " entries, architecture expects ", arch.param_count());
  const auto& sizes = arch.layer_sizes;
  VectorX<S> h = x;
  Index offset = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const Index fan_in = sizes[l], fan_out = sizes[l + 1];
    VectorX<S> a = affine_layer(w, offset, fan_in, fan_out, h);
    offset += (fan_in + 1) * fan_out;
    if (l + 2 < sizes.size())
      for (Index j = 0; j < fan_out; ++j)
        a[j] = apply_activation(arch.activation, a[j], arch.rbf_center, arch.rbf_lengthscale);
    h = std::move(a);
  }
  return h;
}

// Validated double-precision entry point used by prediction and evaluation.
VectorXd mlp_forward(const Architecture& arch, const WeightVector& w, const Eigen::Ref<const VectorXd>& x);

// Per-layer matrices of shape (fan_in + 1) x fan_out, bias in the last row;
// flatten is the exact inverse (column-major within each layer).
std::vector<MatrixXd> unflatten(const Architecture& arch, const Eigen::Ref<const VectorXd>& w);
VectorXd flatten(const Architecture& arch, const std::vector<MatrixXd>& layers);

}  // namespace projbnn

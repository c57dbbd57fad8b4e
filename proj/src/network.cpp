#include "projbnn/network.hpp"

#include "projbnn/rng.hpp"

namespace projbnn {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu:
      return "relu";
    case Activation::rbf:
      return "rbf";
    case Activation::tanh:
      return "tanh";
  }
  throw std::invalid_argument("unknown activation");
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "rbf") return Activation::rbf;
  if (s == "tanh") return Activation::tanh;
  throw std::invalid_argument(cat("unknown activation '", s, "' (expected relu, rbf or tanh)"));
}

void Architecture::validate() const {
  require(layer_sizes.size() >= 3, "architecture needs at least input, one hidden and output layer, got ", layer_sizes.size(), " sizes");
  for (int s : layer_sizes) require(s > 0, "architecture layer size must be positive, got ", s);
  require(rbf_lengthscale > 0.0, "rbf lengthscale must be positive, got ", rbf_lengthscale);
}

Index Architecture::param_count() const {
  validate();
  Index n = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
    n += static_cast<Index>(layer_sizes[l] + 1) * layer_sizes[l + 1];
  return n;
}

std::uint64_t Architecture::fingerprint() const {
  validate();
  std::string canon = "mlp|";
  for (std::size_t i = 0; i < layer_sizes.size(); ++i) canon += cat(i ? "," : "", layer_sizes[i]);
  canon += cat("|", to_string(activation));
  if (activation == Activation::rbf)
    canon += cat("|c=", format_double(rbf_center), "|ell=", format_double(rbf_lengthscale));
  return fnv1a(canon);
}

WeightVector make_weight_vector(const Architecture& arch, VectorXd values) {
  require(values.size() == arch.param_count(), "weight vector has ", values.size(), " entries, architecture expects ", arch.param_count());
  require(values.allFinite(), "weight vector contains non-finite entries");
  return WeightVector{std::move(values), arch.fingerprint()};
}

void check_compatible(const Architecture& arch, const WeightVector& w) {
  require(w.arch_fingerprint == arch.fingerprint(),
          "weight vector was built for a different architecture (fingerprint mismatch)");
  require(w.values.size() == arch.param_count(), "weight vector has ", w.values.size(), " entries, architecture expects ", arch.param_count());
}

double activation_apply(Activation kind, double x, double rbf_center, double rbf_lengthscale) {
  require(rbf_lengthscale > 0.0, "rbf lengthscale must be positive, got ", rbf_lengthscale);
  return apply_activation(kind, x, rbf_center, rbf_lengthscale);
}

VectorXd mlp_forward(const Architecture& arch, const WeightVector& w, const Eigen::Ref<const VectorXd>& x) {
  check_compatible(arch, w);
  const VectorXd xv = x;
  return mlp_forward<double>(arch, w.values, xv);
}

std::vector<MatrixXd> unflatten(const Architecture& arch, const Eigen::Ref<const VectorXd>& w) {
  require(w.size() == arch.param_count(), "unflatten: weight vector has ", w.size(), " entries, architecture expects ", arch.param_count());
  std::vector<MatrixXd> layers;
  Index offset = 0;
  for (std::size_t l = 0; l + 1 < arch.layer_sizes.size(); ++l) {
    const Index rows = arch.layer_sizes[l] + 1, cols = arch.layer_sizes[l + 1];
    layers.emplace_back(Eigen::Map<const MatrixXd>(w.data() + offset, rows, cols));
    offset += rows * cols;
  }
  return layers;
}

VectorXd flatten(const Architecture& arch, const std::vector<MatrixXd>& layers) {
  arch.validate();
  require(layers.size() + 1 == arch.layer_sizes.size(), "flatten: got ", layers.size(), " layer matrices, architecture expects ", arch.layer_sizes.size() - 1);
  VectorXd w(arch.param_count());
  Index offset = 0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Index rows = arch.layer_sizes[l] + 1, cols = arch.layer_sizes[l + 1];
    require(layers[l].rows() == rows && layers[l].cols() == cols, "flatten: layer ", l, " is ", layers[l].rows(), "x", layers[l].cols(), ", expected ", rows, "x", cols);
    Eigen::Map<MatrixXd>(w.data() + offset, rows, cols) = layers[l];
    offset += rows * cols;
  }
  return w;
}

}  // namespace projbnn

#include "projbnn/models.hpp"

namespace projbnn {

double log_joint(const Architecture& arch, const WeightVector& w, const MatrixXd& x, const MatrixXd& y,
                 double sigma_y, double prior_std) {
  check_compatible(arch, w);
  require(prior_std > 0.0, "log_joint: prior std must be positive, got ", prior_std);
  const MlpModel model{arch};
  return log_joint<MlpModel, double>(model, w.values, x, y, sigma_y, prior_std);
}

}  // namespace projbnn

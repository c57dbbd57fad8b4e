#include "projbnn/ad.hpp"

namespace projbnn::ad {

GradientResult gradient(const GradientRequest& req) {
  require(static_cast<bool>(req.loss), "gradient: loss callable is empty");
  Tape tape;
  const Index n = req.at.size();
  VectorX<Var> x(n);
  for (Index i = 0; i < n; ++i) x[i] = Var(req.at[i], &tape, tape.new_leaf());
  const Var out = req.loss(x);
  check_finite(out.v, "loss");
  GradientResult r;
  r.value = out.v;
  r.grad = VectorXd::Zero(n);
  if (out.tracked()) {
    std::vector<double> adjoint;
    tape.backward(out.id, adjoint);
    for (Index i = 0; i < n; ++i) r.grad[i] = adjoint[static_cast<std::size_t>(i)];
  }
  return r;
}

}  // namespace projbnn::ad

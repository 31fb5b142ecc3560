#include "qpce/model.hpp"

#include <cmath>

#include "qpce/errors.hpp"

namespace qpce {

StochasticModel::StochasticModel(Operator h0, Operator v,
                                 CorrelationKernel kernel, double horizon,
                                 double herm_tol)
    : h0_(std::move(h0)),
      v_(std::move(v)),
      kernel_(std::move(kernel)),
      horizon_(horizon),
      frame_(h0_, herm_tol) {
  require_hermitian(v_, "noise coupling", herm_tol);
  require_same_dim(h0_, v_, "stochastic model");
  if (!(horizon_ > 0.0) || !std::isfinite(horizon_))
    throw Error(Errc::invalid_argument, "horizon tau must be positive");
  if (kernel_.max_lag() < horizon_ * (1.0 - 1e-12))
    throw Error(Errc::invalid_argument,
                "correlation table does not cover the evolution horizon");
}

Operator rotating_frame_potential(const StochasticModel& model, double t) {
  return model.frame().to_rotating(model.v(), t);
}

}  // namespace qpce

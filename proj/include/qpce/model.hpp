#pragma once

#include "qpce/kernel.hpp"
#include "qpce/operators.hpp"

namespace qpce {

/// H(t) = h0 + Omega(t) v with Omega a stationary Gaussian process of
/// covariance `kernel`, evolved over [0, horizon].
class StochasticModel {
 public:
  StochasticModel(Operator h0, Operator v, CorrelationKernel kernel,
                  double horizon, double herm_tol = Tolerances{}.hermitian);

  const Operator& h0() const { return h0_; }
  const Operator& v() const { return v_; }
  const CorrelationKernel& kernel() const { return kernel_; }
  double horizon() const { return horizon_; }
  Eigen::Index dim() const { return h0_.rows(); }
  const StaticFrame& frame() const { return frame_; }

 private:
  Operator h0_;
  Operator v_;
  CorrelationKernel kernel_;
  double horizon_;
  StaticFrame frame_;
};

/// V~(t) = U0(t)^dagger v U0(t)
Operator rotating_frame_potential(const StochasticModel& model, double t);

}  // namespace qpce

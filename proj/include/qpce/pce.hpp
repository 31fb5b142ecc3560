#pragma once

#include <memory>
#include <span>
#include <vector>

#include "qpce/kle.hpp"
#include "qpce/model.hpp"
#include "qpce/multi_index.hpp"
#include "qpce/operators.hpp"

namespace qpce {

/// Operator-valued chaos coefficients phi_m(t) of the rotating-frame density
/// matrix, rho~(t; xi) = sum_m phi_m(t) Phi_m(xi). Stored as one flat buffer
/// of N column-major dim x dim blocks.
class PCEState {
 public:
  PCEState(std::shared_ptr<const MultiIndexSet> basis, Eigen::Index dim,
           double time = 0.0);

  std::size_t size() const { return basis_->size(); }
  Eigen::Index dim() const { return dim_; }
  double time() const { return time_; }
  void set_time(double t) { time_ = t; }
  const MultiIndexSet& basis() const { return *basis_; }
  const std::shared_ptr<const MultiIndexSet>& basis_ptr() const {
    return basis_;
  }

  Eigen::Map<Operator> coefficient(std::size_t m) {
    return Eigen::Map<Operator>(data_.data() + m * block(), dim_, dim_);
  }
  Eigen::Map<const Operator> coefficient(std::size_t m) const {
    return Eigen::Map<const Operator>(data_.data() + m * block(), dim_, dim_);
  }

  std::span<Complex> data() { return data_; }
  std::span<const Complex> data() const { return data_; }

 private:
  std::size_t block() const { return static_cast<std::size_t>(dim_ * dim_); }

  std::shared_ptr<const MultiIndexSet> basis_;
  Eigen::Index dim_;
  double time_;
  std::vector<Complex> data_;
};

/// phi_0 = rho0, all other coefficients zero.
PCEState initial_pce_state(const DensityMatrix& rho0,
                           std::shared_ptr<const MultiIndexSet> basis);

/// d phi_m / dt = -i sum_n sqrt(lambda_n) g_n(t) sum_l G_mnl [V~(t), phi_l]
std::vector<Operator> hierarchy_rhs(const PCEState& state, double t,
                                    const TruncatedKLE& kle,
                                    const StochasticModel& model,
                                    const GalerkinCouplings& couplings);

struct PropagationOptions {
  /// Largest RK4 step; 0 selects horizon / 2000.
  double dt_max = 0.0;
  /// Use the OpenMP hierarchy kernel.
  bool parallel = false;
  /// Trace and Hermiticity tolerance of the coefficients; exceeding it by
  /// 100x aborts with propagation-diverged.
  double invariant_tol = 1e-8;
};

/// Classic fixed-step RK4 over t_grid (which must start at state.time()).
/// Returns the state at every t_grid point, the initial one included.
std::vector<PCEState> propagate(const PCEState& state,
                                const StochasticModel& model,
                                const TruncatedKLE& kle,
                                const GalerkinCouplings& couplings,
                                std::span<const double> t_grid,
                                const PropagationOptions& options = {});

/// E_xi[rho(t; xi)] = phi_0, transformed back to the lab frame.
DensityMatrix mean_state(const PCEState& state, const StochasticModel& model);

/// Var_xi[tr(obs rho(t; xi))] = sum_{m != 0} prod_j m_j! tr(obs phi_m)^2
/// (observable taken in the lab frame).
double observable_variance(const PCEState& state, const Operator& obs,
                           const StochasticModel& model);

struct StateDiagnostics {
  /// max_m |tr phi_m(t) - tr phi_m(0)|
  double trace_error = 0.0;
  /// max_m ||phi_m - phi_m^dagger||_F
  double hermiticity_error = 0.0;
};

StateDiagnostics diagnose(const PCEState& state, const PCEState& initial);

}  // namespace qpce

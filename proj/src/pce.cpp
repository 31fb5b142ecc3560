#include "qpce/pce.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "qpce/errors.hpp"
#include "qpce/kernels.hpp"

namespace qpce {

PCEState::PCEState(std::shared_ptr<const MultiIndexSet> basis, Eigen::Index dim,
                   double time)
    : basis_(std::move(basis)), dim_(dim), time_(time) {
  if (!basis_) throw Error(Errc::invalid_argument, "PCE state needs a basis");
  if (dim_ <= 0) throw Error(Errc::invalid_argument, "PCE state needs dim >= 1");
  data_.assign(basis_->size() * block(), Complex(0.0));
}

PCEState initial_pce_state(const DensityMatrix& rho0,
                           std::shared_ptr<const MultiIndexSet> basis) {
  PCEState state(std::move(basis), rho0.dim());
  state.coefficient(0) = rho0.op();
  return state;
}

namespace {

// sqrt(lambda_n) g_n(t) for every retained mode at every time; row n.
std::vector<std::vector<double>> mode_amplitudes(
    const TruncatedKLE& kle, const CorrelationKernel& kernel,
    std::span<const double> times) {
  std::vector<std::vector<double>> amps;
  amps.reserve(kle.dimension());
  for (const auto& mode : kle.modes) {
    // Null modes carry no noise power; their amplitude is zero everywhere.
    if (!(mode.eigenvalue > 1e-12 * mode.leading_eigenvalue) ||
        mode.eigenvalue <= 0.0) {
      amps.emplace_back(times.size(), 0.0);
      continue;
    }
    auto g = evaluate_mode(mode, kernel, times);
    const double scale = std::sqrt(mode.eigenvalue);
    for (double& x : g) x *= scale;
    amps.push_back(std::move(g));
  }
  return amps;
}

void check_compatible(const PCEState& state, const TruncatedKLE& kle,
                      const StochasticModel& model,
                      const GalerkinCouplings& couplings) {
  if (state.dim() != model.dim())
    throw Error(Errc::dimension_mismatch,
                "PCE state dimension differs from the model dimension");
  if (couplings.size() != state.size() ||
      couplings.dimension != state.basis().dimension())
    throw Error(Errc::dimension_mismatch,
                "Galerkin couplings were built for a different basis");
  if (kle.dimension() != state.basis().dimension())
    throw Error(Errc::dimension_mismatch,
                fmt::format("basis has stochastic dimension {} but the KLE "
                            "retains {} modes",
                            state.basis().dimension(), kle.dimension()));
}

}  // namespace

std::vector<Operator> hierarchy_rhs(const PCEState& state, double t,
                                    const TruncatedKLE& kle,
                                    const StochasticModel& model,
                                    const GalerkinCouplings& couplings) {
  check_compatible(state, kle, model, couplings);
  const double times[] = {t};
  const auto amps = mode_amplitudes(kle, model.kernel(), times);
  std::vector<double> amplitudes(kle.dimension());
  for (std::size_t n = 0; n < amplitudes.size(); ++n) amplitudes[n] = amps[n][0];

  std::vector<Complex> out(state.data().size());
  kernels::hierarchy_apply_serial(couplings, amplitudes,
                                  rotating_frame_potential(model, t),
                                  state.data(), out);
  std::vector<Operator> derivs;
  derivs.reserve(state.size());
  const auto d = state.dim();
  for (std::size_t m = 0; m < state.size(); ++m)
    derivs.emplace_back(
        Eigen::Map<const Operator>(out.data() + m * d * d, d, d));
  return derivs;
}

StateDiagnostics diagnose(const PCEState& state, const PCEState& initial) {
  StateDiagnostics diag;
  for (std::size_t m = 0; m < state.size(); ++m) {
    const auto phi = state.coefficient(m);
    const Complex drift = phi.trace() - initial.coefficient(m).trace();
    diag.trace_error = std::max(diag.trace_error, std::abs(drift));
    diag.hermiticity_error = std::max(
        diag.hermiticity_error, (phi - phi.adjoint()).norm());
    // std::max drops nan; a non-finite coefficient must still show up.
    if (!phi.allFinite()) {
      diag.trace_error = diag.hermiticity_error =
          std::numeric_limits<double>::infinity();
      break;
    }
  }
  return diag;
}

std::vector<PCEState> propagate(const PCEState& state,
                                const StochasticModel& model,
                                const TruncatedKLE& kle,
                                const GalerkinCouplings& couplings,
                                std::span<const double> t_grid,
                                const PropagationOptions& options) {
  check_compatible(state, kle, model, couplings);
  if (t_grid.empty()) return {};
  const double scale = std::max(1.0, std::abs(state.time()));
  if (std::abs(t_grid.front() - state.time()) > 1e-12 * scale)
    throw Error(Errc::invalid_argument,
                fmt::format("time grid starts at {} but the state is at {}",
                            t_grid.front(), state.time()));
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (!(t_grid[i] > t_grid[i - 1]))
      throw Error(Errc::invalid_argument, "time grid must be strictly ascending");
  const double dt_max =
      options.dt_max > 0.0 ? options.dt_max : model.horizon() / 2000.0;

  // Half-step schedule: step s spans half-points 2s .. 2s+2.
  std::vector<std::size_t> steps_per_interval(t_grid.size(), 0);
  std::vector<double> half_times{t_grid.front()};
  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    const double span = t_grid[i] - t_grid[i - 1];
    const auto n = static_cast<std::size_t>(std::ceil(span / dt_max - 1e-9));
    steps_per_interval[i] = std::max<std::size_t>(n, 1);
    const double h = span / static_cast<double>(steps_per_interval[i]);
    for (std::size_t s = 0; s < steps_per_interval[i]; ++s) {
      const double t0 = t_grid[i - 1] + h * static_cast<double>(s);
      half_times.push_back(t0 + 0.5 * h);
      half_times.push_back(s + 1 == steps_per_interval[i] ? t_grid[i]
                                                          : t0 + h);
    }
  }

  const auto amps = mode_amplitudes(kle, model.kernel(), half_times);
  std::vector<Operator> vt(half_times.size());
#pragma omp parallel for schedule(static)
  for (std::size_t k = 0; k < half_times.size(); ++k)
    vt[k] = model.frame().to_rotating(model.v(), half_times[k]);

  const std::size_t S = kle.dimension();
  std::vector<double> amp_at(S);
  auto rhs = [&](std::size_t half, std::span<const Complex> in,
                 std::span<Complex> out) {
    for (std::size_t n = 0; n < S; ++n) amp_at[n] = amps[n][half];
    if (options.parallel)
      kernels::hierarchy_apply_omp(couplings, amp_at, vt[half], in, out);
    else
      kernels::hierarchy_apply_serial(couplings, amp_at, vt[half], in, out);
  };

  const std::size_t len = state.data().size();
  std::vector<Complex> y(state.data().begin(), state.data().end());
  std::vector<Complex> k1(len), k2(len), k3(len), k4(len), tmp(len);

  std::vector<PCEState> trajectory;
  trajectory.reserve(t_grid.size());
  trajectory.push_back(state);
  const double limit = 100.0 * options.invariant_tol;
  std::size_t half = 0;
  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    const double h = (t_grid[i] - t_grid[i - 1]) /
                     static_cast<double>(steps_per_interval[i]);
    for (std::size_t s = 0; s < steps_per_interval[i]; ++s, half += 2) {
      rhs(half, y, k1);
      for (std::size_t q = 0; q < len; ++q) tmp[q] = y[q] + (0.5 * h) * k1[q];
      rhs(half + 1, tmp, k2);
      for (std::size_t q = 0; q < len; ++q) tmp[q] = y[q] + (0.5 * h) * k2[q];
      rhs(half + 1, tmp, k3);
      for (std::size_t q = 0; q < len; ++q) tmp[q] = y[q] + h * k3[q];
      rhs(half + 2, tmp, k4);
      for (std::size_t q = 0; q < len; ++q)
        y[q] += (h / 6.0) * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]);
    }
    PCEState snapshot(state.basis_ptr(), state.dim(), t_grid[i]);
    std::copy(y.begin(), y.end(), snapshot.data().begin());
    const auto diag = diagnose(snapshot, state);
    if (!(diag.trace_error <= limit) || !(diag.hermiticity_error <= limit))
      throw Error(Errc::propagation_diverged,
                  fmt::format("PCE invariants violated at t={} (trace drift "
                              "{:.3g}, Hermiticity {:.3g}); reduce dt_max",
                              t_grid[i], diag.trace_error,
                              diag.hermiticity_error));
    trajectory.push_back(std::move(snapshot));
  }
  return trajectory;
}

DensityMatrix mean_state(const PCEState& state, const StochasticModel& model) {
  if (state.dim() != model.dim())
    throw Error(Errc::dimension_mismatch,
                "PCE state dimension differs from the model dimension");
  const Operator phi0 = state.coefficient(0);
  return DensityMatrix(model.frame().to_lab(phi0, state.time()), 1e-6, 1e-8);
}

double observable_variance(const PCEState& state, const Operator& obs,
                           const StochasticModel& model) {
  require_same_dim(obs, model.h0(), "observable_variance");
  const Operator rotated = model.frame().to_rotating(obs, state.time());
  double var = 0.0;
  for (std::size_t m = 1; m < state.size(); ++m) {
    const double proj = (rotated * state.coefficient(m)).trace().real();
    var += state.basis().norm_squared(m) * proj * proj;
  }
  return var;
}

}  // namespace qpce

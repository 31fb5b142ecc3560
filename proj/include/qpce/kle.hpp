#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "qpce/kernel.hpp"
#include "qpce/operators.hpp"

namespace qpce {

/// One eigenpair (lambda, g) of the covariance integral operator on [0, tau],
/// with g sampled at the quadrature nodes and normalized so that
/// sum_k w_k g(t_k)^2 = 1.
struct KLMode {
  double eigenvalue = 0.0;
  std::vector<double> values;
  /// Node-local quadrature correction term of the discrete eigen-equation,
  /// lambda g_i = sum_k w_k C(t_i, t_k) g_k + correction_i. Needed so the
  /// off-grid extension reproduces the nodal values.
  std::vector<double> correction;
  /// Kink shift delta removed from the first off-diagonal of the solve.
  double kink_shift = 0.0;
  std::shared_ptr<const QuadratureGrid> grid;
  /// 1-based rank by eigenvalue in the solve that produced the mode.
  std::size_t index = 0;
  /// Largest eigenvalue of that solve.
  double leading_eigenvalue = 0.0;
};

/// Eigenpairs of int_0^tau C(t1, t2) g(t2) dt2 = lambda g(t1) by a
/// symmetrized Nystrom discretization on `grid_size` trapezoid nodes.
/// Returns the top `n_modes` by eigenvalue, descending.
///
/// The trapezoid rule loses second order at the derivative kink of C on
/// the diagonal, which shifts every smooth eigenvalue by
/// delta = -h^2 C'(0+) / 6. The shift is removed by subtracting delta / 2
/// from each first off-diagonal entry; the diagonal (and so the discrete
/// Mercer trace) is untouched.
std::vector<KLMode> solve_fredholm(const CorrelationKernel& kernel, double tau,
                                   std::size_t grid_size, std::size_t n_modes);

/// Nystrom extension of a mode to an arbitrary t in [0, tau].
double evaluate_mode(const KLMode& mode, const CorrelationKernel& kernel,
                     double t);
/// evaluate_mode at many times.
std::vector<double> evaluate_mode(const KLMode& mode,
                                  const CorrelationKernel& kernel,
                                  std::span<const double> times);

/// Cumulative first-order transition rate of one mode:
/// sum_{j,k} (1/tau) |<j|v|k> int_0^tau e^{i(E_j-E_k)t} sqrt(lambda) g(t) dt|^2
/// over all ordered pairs of h0 eigenstates, diagonal pairs included.
double transition_rate(const KLMode& mode, const Operator& h0,
                       const Operator& v, double tau);

std::vector<double> transition_rates(std::span<const KLMode> modes,
                                     const Operator& h0, const Operator& v,
                                     double tau);

struct ModeReport {
  std::size_t index = 0;
  double eigenvalue = 0.0;
  double rate = 0.0;
  bool selected = false;
};

/// Modes retained for the stochastic expansion, ordered by descending rate.
struct TruncatedKLE {
  std::vector<KLMode> modes;
  std::vector<double> rates;
  /// Every candidate mode, in the order it was passed to select_modes.
  std::vector<ModeReport> report;

  std::size_t dimension() const { return modes.size(); }
};

/// Keeps the S modes with the largest rates. Ties go to the larger
/// eigenvalue, then to the lower index.
TruncatedKLE select_modes(std::span<const KLMode> modes,
                          std::span<const double> rates, std::size_t S);

/// Default number of candidate modes computed before rate selection.
inline std::size_t default_candidate_modes(std::size_t S) {
  return S * 4 > 12 ? S * 4 : 12;
}

/// sum_n lambda_n g_n(t_i) g_n(t_j) over the grid nodes, plus the kink
/// shift that the solve removed from the first off-diagonal. With the full
/// spectrum this reproduces C(t_i, t_j).
Eigen::MatrixXd reconstruct_covariance(std::span<const KLMode> modes);

/// Omega(t_k) = sum_n sqrt(lambda_n) g_n(t_k) xi_n at the grid nodes.
std::vector<double> sample_from_kle(std::span<const KLMode> modes,
                                    std::span<const double> xi);

}  // namespace qpce

#include "qpce/kle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "qpce/errors.hpp"

namespace qpce {

namespace {

constexpr double kClampFraction = 1e-6;  // hard error below -kClampFraction*lmax
constexpr double kNullModeFraction = 1e-12;
constexpr double kSignTolerance = 1e-12;

}  // namespace

std::vector<KLMode> solve_fredholm(const CorrelationKernel& kernel, double tau,
                                   std::size_t grid_size, std::size_t n_modes) {
  if (n_modes == 0 || n_modes > grid_size)
    throw Error(Errc::invalid_argument,
                fmt::format("n_modes must lie in [1, grid_size={}], got {}",
                            grid_size, n_modes));
  if (kernel.max_lag() < tau * (1.0 - 1e-12))
    throw Error(Errc::invalid_argument,
                "correlation kernel does not cover the horizon");
  auto grid = std::make_shared<const QuadratureGrid>(
      QuadratureGrid::trapezoid(tau, grid_size));
  const auto n = static_cast<Eigen::Index>(grid_size);
  const double h = grid->spacing();

  std::vector<double> by_lag(grid_size);
  for (std::size_t k = 0; k < grid_size; ++k)
    by_lag[k] = kernel.at(std::min(h * static_cast<double>(k), tau));

  Eigen::VectorXd sqrt_w(n);
  for (Eigen::Index i = 0; i < n; ++i) sqrt_w(i) = std::sqrt(grid->weights[i]);

  Eigen::MatrixXd a(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      a(i, j) = sqrt_w(i) * sqrt_w(j) * by_lag[std::abs(i - j)];

  const double delta = -h * h * kernel.slope_at_origin() / 6.0;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    a(i, i + 1) -= 0.5 * delta;
    a(i + 1, i) -= 0.5 * delta;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  if (eig.info() != Eigen::Success)
    throw Error(Errc::numerical_consistency,
                "symmetric eigensolver failed on the Nystrom matrix");
  const Eigen::VectorXd& lambdas = eig.eigenvalues();  // ascending
  const double lmax = std::max(lambdas(n - 1), 0.0);
  if (lambdas(0) < -kClampFraction * lmax)
    throw Error(Errc::kernel_not_psd,
                fmt::format("covariance kernel is not positive semidefinite: "
                            "eigenvalue {:.6g} vs largest {:.6g}",
                            lambdas(0), lmax));

  std::vector<KLMode> modes;
  modes.reserve(n_modes);
  for (std::size_t r = 0; r < n_modes; ++r) {
    const Eigen::Index col = n - 1 - static_cast<Eigen::Index>(r);
    KLMode mode;
    mode.eigenvalue = std::max(lambdas(col), 0.0);
    mode.index = r + 1;
    mode.leading_eigenvalue = lmax;
    mode.grid = grid;
    mode.kink_shift = delta;
    mode.values.resize(grid_size);

    const auto vec = eig.eigenvectors().col(col);
    double norm = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      mode.values[i] = vec(i) / sqrt_w(i);
      norm += grid->weights[i] * mode.values[i] * mode.values[i];
    }
    norm = std::sqrt(norm);
    double mass = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      mode.values[i] /= norm;
      mass += grid->weights[i] * mode.values[i];
    }
    const bool flip = std::abs(mass) < kSignTolerance ? mode.values[0] < 0.0
                                                      : mass < 0.0;
    if (flip)
      for (double& g : mode.values) g = -g;

    mode.correction.assign(grid_size, 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      double c = 0.0;
      if (i > 0) c += sqrt_w(i - 1) / sqrt_w(i) * mode.values[i - 1];
      if (i + 1 < n) c += sqrt_w(i + 1) / sqrt_w(i) * mode.values[i + 1];
      mode.correction[i] = -0.5 * delta * c;
    }
    modes.push_back(std::move(mode));
  }
  return modes;
}

namespace {

void require_extensible(const KLMode& mode) {
  if (!(mode.eigenvalue > kNullModeFraction * mode.leading_eigenvalue) ||
      mode.eigenvalue <= 0.0)
    throw Error(Errc::degenerate_mode,
                fmt::format("mode {} has eigenvalue {:.3g}; the Nystrom "
                            "extension is undefined for null modes",
                            mode.index, mode.eigenvalue));
}

double extend(const KLMode& mode, const CorrelationKernel& kernel, double t) {
  const auto& grid = *mode.grid;
  const double tau = grid.horizon();
  const double slack = 1e-12 * tau;
  if (!(t >= -slack && t <= tau + slack))
    throw Error(Errc::invalid_argument,
                fmt::format("mode evaluation time {} outside [0, {}]", t, tau));
  t = std::clamp(t, 0.0, tau);

  double sum = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k)
    sum += grid.weights[k] * kernel.at(t - grid.nodes[k]) * mode.values[k];

  const auto upper =
      std::upper_bound(grid.nodes.begin(), grid.nodes.end(), t);
  std::size_t hi = static_cast<std::size_t>(upper - grid.nodes.begin());
  hi = std::clamp<std::size_t>(hi, 1, grid.size() - 1);
  const std::size_t lo = hi - 1;
  const double frac = (t - grid.nodes[lo]) / (grid.nodes[hi] - grid.nodes[lo]);
  // Trapezoid error of a kink at fraction s of a cell goes as B2(s) =
  // s^2 - s + 1/6; the node correction is the s = 0 value.
  const double b2 = 6.0 * frac * frac - 6.0 * frac + 1.0;
  sum += b2 * ((1.0 - frac) * mode.correction[lo] + frac * mode.correction[hi]);
  return sum / mode.eigenvalue;
}

}  // namespace

double evaluate_mode(const KLMode& mode, const CorrelationKernel& kernel,
                     double t) {
  require_extensible(mode);
  return extend(mode, kernel, t);
}

std::vector<double> evaluate_mode(const KLMode& mode,
                                  const CorrelationKernel& kernel,
                                  std::span<const double> times) {
  require_extensible(mode);
  const double tau = mode.grid->horizon();
  for (double t : times)
    if (!(t >= -1e-12 * tau && t <= tau * (1.0 + 1e-12)))
      throw Error(Errc::invalid_argument,
                  fmt::format("mode evaluation time {} outside [0, {}]", t, tau));
  std::vector<double> out(times.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < times.size(); ++i)
    out[i] = extend(mode, kernel, times[i]);
  return out;
}

double transition_rate(const KLMode& mode, const Operator& h0,
                       const Operator& v, double tau) {
  require_hermitian(h0, "drift Hamiltonian");
  require_hermitian(v, "noise coupling");
  require_same_dim(h0, v, "transition_rate");
  if (!(tau > 0.0))
    throw Error(Errc::invalid_argument, "horizon tau must be positive");

  const StaticFrame frame(h0);
  const Operator v_eig =
      frame.eigenvectors().adjoint() * v * frame.eigenvectors();
  const auto& grid = *mode.grid;
  const double amp = std::sqrt(mode.eigenvalue);
  const Eigen::Index d = h0.rows();

  double total = 0.0;
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index k = 0; k < d; ++k) {
      const double coupling = std::norm(v_eig(j, k));
      if (coupling == 0.0) continue;
      const double omega = frame.energies()(j) - frame.energies()(k);
      Complex integral = 0.0;
      for (std::size_t q = 0; q < grid.size(); ++q)
        integral += grid.weights[q] * mode.values[q] *
                    std::polar(1.0, omega * grid.nodes[q]);
      integral *= amp;
      total += coupling * std::norm(integral) / tau;
    }
  }
  return total;
}

std::vector<double> transition_rates(std::span<const KLMode> modes,
                                     const Operator& h0, const Operator& v,
                                     double tau) {
  require_hermitian(h0, "drift Hamiltonian");
  require_hermitian(v, "noise coupling");
  require_same_dim(h0, v, "transition_rates");
  if (!(tau > 0.0))
    throw Error(Errc::invalid_argument, "horizon tau must be positive");
  std::vector<double> rates(modes.size());
#pragma omp parallel for schedule(static)
  for (std::size_t n = 0; n < modes.size(); ++n)
    rates[n] = transition_rate(modes[n], h0, v, tau);
  return rates;
}

TruncatedKLE select_modes(std::span<const KLMode> modes,
                          std::span<const double> rates, std::size_t S) {
  if (rates.size() != modes.size())
    throw Error(Errc::dimension_mismatch,
                "select_modes: one rate per mode is required");
  if (S == 0 || S > modes.size())
    throw Error(Errc::insufficient_modes,
                fmt::format("stochastic dimension S={} exceeds the {} "
                            "computed modes",
                            S, modes.size()));

  std::vector<std::size_t> order(modes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    if (rates[a] != rates[b]) return rates[a] > rates[b];
    if (modes[a].eigenvalue != modes[b].eigenvalue)
      return modes[a].eigenvalue > modes[b].eigenvalue;
    return modes[a].index < modes[b].index;
  });

  TruncatedKLE kle;
  kle.report.resize(modes.size());
  for (std::size_t n = 0; n < modes.size(); ++n)
    kle.report[n] = {modes[n].index, modes[n].eigenvalue, rates[n], false};
  for (std::size_t r = 0; r < S; ++r) {
    kle.modes.push_back(modes[order[r]]);
    kle.rates.push_back(rates[order[r]]);
    kle.report[order[r]].selected = true;
  }
  return kle;
}

Eigen::MatrixXd reconstruct_covariance(std::span<const KLMode> modes) {
  if (modes.empty()) return {};
  const auto n = static_cast<Eigen::Index>(modes.front().values.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
  for (const auto& mode : modes) {
    if (static_cast<Eigen::Index>(mode.values.size()) != n)
      throw Error(Errc::dimension_mismatch,
                  "reconstruct_covariance: modes do not share a grid");
    const Eigen::Map<const Eigen::VectorXd> g(mode.values.data(), n);
    cov.noalias() += mode.eigenvalue * g * g.transpose();
  }
  const auto& w = modes.front().grid->weights;
  const double delta = modes.front().kink_shift;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double shift = 0.5 * delta / std::sqrt(w[i] * w[i + 1]);
    cov(i, i + 1) += shift;
    cov(i + 1, i) += shift;
  }
  return cov;
}

std::vector<double> sample_from_kle(std::span<const KLMode> modes,
                                    std::span<const double> xi) {
  if (xi.size() != modes.size())
    throw Error(Errc::dimension_mismatch,
                "sample_from_kle: one random variable per mode is required");
  if (modes.empty()) return {};
  std::vector<double> path(modes.front().values.size(), 0.0);
  for (std::size_t n = 0; n < modes.size(); ++n) {
    const double amp = std::sqrt(modes[n].eigenvalue) * xi[n];
    for (std::size_t k = 0; k < path.size(); ++k)
      path[k] += amp * modes[n].values[k];
  }
  return path;
}

}  // namespace qpce

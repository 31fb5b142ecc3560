#pragma once

// Reference computations used only by the tests. None of these share code
// with the library.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>

namespace oracle {

using Matrix = Eigen::MatrixXcd;

/// exp(a) by scaling and squaring of a Taylor series.
inline Matrix taylor_expm(const Matrix& a) {
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  double scale = 1.0;
  while (norm * scale > 0.25) {
    scale *= 0.5;
    ++squarings;
  }
  const Matrix x = a * scale;
  Matrix term = Matrix::Identity(a.rows(), a.cols());
  Matrix sum = term;
  for (int k = 1; k < 30; ++k) {
    term = term * x / static_cast<double>(k);
    sum += term;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

/// Gauss nodes and weights for the standard normal density (probabilists'
/// Hermite), by Golub-Welsch on the Jacobi matrix.
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline GaussRule gauss_hermite(int n) {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) j(k, k - 1) = j(k - 1, k) = std::sqrt(double(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(j);
  GaussRule rule;
  for (int k = 0; k < n; ++k) {
    rule.nodes.push_back(eig.eigenvalues()(k));
    const double v = eig.eigenvectors()(0, k);
    rule.weights.push_back(v * v);
  }
  return rule;
}

/// He_n(x) by the three-term recurrence.
inline double hermite_he(unsigned n, double x) {
  double prev = 1.0, cur = x;
  if (n == 0) return prev;
  for (unsigned k = 1; k < n; ++k) {
    const double next = x * cur - k * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

/// Eigenvalues of alpha^2 exp(-|t - s| / tau_c) on [0, tau], largest first,
/// from the transcendental equations of the exponential kernel on the
/// symmetric interval [-a, a], a = tau / 2:
///   even modes: x tan x = c a,  odd modes: x cot x = -c a,  c = 1 / tau_c,
/// with w = x / a and lambda = 2 c alpha^2 / (w^2 + c^2).
inline std::vector<double> ou_eigenvalues(double alpha, double tau_c, double tau,
                                          int count) {
  const double c = 1.0 / tau_c;
  const double a = 0.5 * tau;
  const double ca = c * a;
  const double pi = std::numbers::pi;
  const auto even = [ca](double x) { return x * std::sin(x) - ca * std::cos(x); };
  const auto odd = [ca](double x) { return x * std::cos(x) + ca * std::sin(x); };
  const auto solve = [](auto f, double lo, double hi) {
    boost::math::tools::eps_tolerance<double> tol(52);
    std::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve(f, lo, hi, tol, iters);
    return 0.5 * (r.first + r.second);
  };
  std::vector<double> roots;
  for (int k = 0; static_cast<int>(roots.size()) < count; ++k) {
    const double e_lo = k * pi, e_hi = k * pi + 0.5 * pi;
    roots.push_back(solve(even, e_lo == 0.0 ? 1e-300 : e_lo, e_hi));
    roots.push_back(solve(odd, k * pi + 0.5 * pi, (k + 1) * pi));
  }
  std::vector<double> out;
  for (double x : roots) {
    const double w = x / a;
    out.push_back(2.0 * c * alpha * alpha / (w * w + c * c));
  }
  std::sort(out.rbegin(), out.rend());
  out.resize(count);
  return out;
}

/// <sigma_x>(t) for H = Omega(t) sigma_z, rho0 = |x+><x+| and OU noise:
/// exp(-2 int_0^t int_0^t C) = exp(-4 alpha^2 tau_c (t - tau_c (1 - e^{-t/tau_c}))).
inline double dephasing_coherence(double alpha, double tau_c, double t) {
  return std::exp(-4.0 * alpha * alpha * tau_c *
                  (t - tau_c * (1.0 - std::exp(-t / tau_c))));
}

/// Same quantity by 2-D trapezoid quadrature of the kernel.
inline double dephasing_coherence_quadrature(double alpha, double tau_c, double t,
                                             int n = 801) {
  const double h = t / (n - 1);
  double sum = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double wi = (i == 0 || i == n - 1) ? 0.5 : 1.0;
      const double wj = (j == 0 || j == n - 1) ? 0.5 : 1.0;
      sum += wi * wj * alpha * alpha * std::exp(-std::abs(i - j) * h / tau_c);
    }
  return std::exp(-2.0 * sum * h * h);
}

}  // namespace oracle

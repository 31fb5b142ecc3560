#pragma once

#include <cstddef>
#include <variant>
#include <vector>

namespace qpce {

/// C(t) = alpha^2 exp(-|t| / tau_c)
struct OrnsteinUhlenbeck {
  double alpha = 0.0;
  double tau_c = 1.0;

  bool operator==(const OrnsteinUhlenbeck&) const = default;
};

/// C(t) sampled at lags 0, spacing, 2*spacing, ...; linear in between.
struct TabulatedCorrelation {
  double spacing = 1.0;
  std::vector<double> values;

  bool operator==(const TabulatedCorrelation&) const = default;
};

/// Covariance of a stationary, mean-zero Gaussian process. Stationarity is
/// structural: the kernel is only ever evaluated at a lag |t1 - t2|.
class CorrelationKernel {
 public:
  using Kind = std::variant<OrnsteinUhlenbeck, TabulatedCorrelation>;

  static CorrelationKernel ornstein_uhlenbeck(double alpha, double tau_c);
  static CorrelationKernel tabulated(double spacing, std::vector<double> values);
  /// C == c on lags [0, max_lag].
  static CorrelationKernel constant(double c, double max_lag);

  double at(double lag) const;
  double operator()(double t1, double t2) const { return at(t1 - t2); }

  /// C(0)
  double variance() const;
  /// One-sided derivative C'(0+); zero for kernels smooth at the origin.
  double slope_at_origin() const;
  /// Largest lag the kernel is defined for (infinity for closed forms).
  double max_lag() const;

  const Kind& kind() const { return kind_; }
  const OrnsteinUhlenbeck* ou() const {
    return std::get_if<OrnsteinUhlenbeck>(&kind_);
  }

  bool operator==(const CorrelationKernel&) const = default;

 private:
  explicit CorrelationKernel(Kind kind) : kind_(std::move(kind)) {}
  Kind kind_;
};

/// Nodes and weights of a quadrature rule on [0, tau].
struct QuadratureGrid {
  std::vector<double> nodes;
  std::vector<double> weights;

  /// Composite trapezoid on n >= 2 equally spaced nodes.
  static QuadratureGrid trapezoid(double tau, std::size_t n);

  std::size_t size() const { return nodes.size(); }
  double horizon() const { return nodes.back(); }
  double spacing() const { return nodes[1] - nodes[0]; }
};

}  // namespace qpce

#include "qpce/kernel.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "qpce/errors.hpp"

namespace qpce {

CorrelationKernel CorrelationKernel::ornstein_uhlenbeck(double alpha,
                                                        double tau_c) {
  if (!std::isfinite(alpha))
    throw Error(Errc::invalid_argument, "OU coupling alpha must be finite");
  if (!(tau_c > 0.0) || !std::isfinite(tau_c))
    throw Error(Errc::invalid_argument,
                "OU correlation time tau_c must be positive and finite");
  return CorrelationKernel(OrnsteinUhlenbeck{alpha, tau_c});
}

CorrelationKernel CorrelationKernel::tabulated(double spacing,
                                               std::vector<double> values) {
  if (!(spacing > 0.0) || !std::isfinite(spacing))
    throw Error(Errc::invalid_argument, "table spacing must be positive");
  if (values.size() < 2)
    throw Error(Errc::invalid_argument,
                "correlation table needs at least two lags");
  const double c0 = values.front();
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!std::isfinite(values[k]))
      throw Error(Errc::invalid_argument, "correlation table has non-finite entry");
    if (std::abs(values[k]) > c0 * (1.0 + 1e-12))
      throw Error(Errc::invalid_argument,
                  fmt::format("correlation table violates C(0) >= |C(dt)| at "
                              "lag index {} ({} > {})",
                              k, std::abs(values[k]), c0));
  }
  return CorrelationKernel(TabulatedCorrelation{spacing, std::move(values)});
}

CorrelationKernel CorrelationKernel::constant(double c, double max_lag) {
  return tabulated(max_lag, {c, c});
}

double CorrelationKernel::at(double lag) const {
  lag = std::abs(lag);
  if (const auto* p = std::get_if<OrnsteinUhlenbeck>(&kind_))
    return p->alpha * p->alpha * std::exp(-lag / p->tau_c);

  const auto& tab = std::get<TabulatedCorrelation>(kind_);
  const double x = lag / tab.spacing;
  const auto last = tab.values.size() - 1;
  if (x >= static_cast<double>(last)) {
    // Allow roundoff at the table end, nothing beyond.
    if (x > static_cast<double>(last) * (1.0 + 1e-12))
      throw Error(Errc::invalid_argument,
                  fmt::format("lag {} exceeds correlation table range {}", lag,
                              tab.spacing * static_cast<double>(last)));
    return tab.values[last];
  }
  const auto k = static_cast<std::size_t>(x);
  const double frac = x - static_cast<double>(k);
  return (1.0 - frac) * tab.values[k] + frac * tab.values[k + 1];
}

double CorrelationKernel::variance() const { return at(0.0); }

double CorrelationKernel::slope_at_origin() const {
  if (const auto* p = std::get_if<OrnsteinUhlenbeck>(&kind_))
    return -p->alpha * p->alpha / p->tau_c;
  const auto& tab = std::get<TabulatedCorrelation>(kind_);
  return (tab.values[1] - tab.values[0]) / tab.spacing;
}

double CorrelationKernel::max_lag() const {
  if (ou()) return std::numeric_limits<double>::infinity();
  const auto& tab = std::get<TabulatedCorrelation>(kind_);
  return tab.spacing * static_cast<double>(tab.values.size() - 1);
}

QuadratureGrid QuadratureGrid::trapezoid(double tau, std::size_t n) {
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw Error(Errc::invalid_argument, "horizon tau must be positive");
  if (n < 2)
    throw Error(Errc::invalid_argument, "quadrature grid needs >= 2 nodes");
  QuadratureGrid grid;
  grid.nodes.resize(n);
  grid.weights.resize(n);
  const double h = tau / static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k) {
    grid.nodes[k] = k + 1 == n ? tau : h * static_cast<double>(k);
    grid.weights[k] = h;
  }
  grid.weights.front() = grid.weights.back() = 0.5 * h;
  return grid;
}

}  // namespace qpce

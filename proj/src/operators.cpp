#include "qpce/operators.hpp"

#include <cmath>
#include <string>

#include <fmt/format.h>

#include "qpce/errors.hpp"

namespace qpce {

namespace pauli {
Operator identity() { return Operator::Identity(2, 2); }

Operator x() {
  Operator m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

Operator y() {
  Operator m(2, 2);
  m << 0, Complex(0, -1), Complex(0, 1), 0;
  return m;
}

Operator z() {
  Operator m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}
}  // namespace pauli

double hermiticity_error(const Operator& a) {
  double err = 0.0;
  for (Eigen::Index j = 0; j < a.rows(); ++j)
    for (Eigen::Index k = j; k < a.cols(); ++k)
      err = std::max(err, std::abs(a(j, k) - std::conj(a(k, j))));
  return err;
}

bool is_hermitian(const Operator& a, double tol) {
  return a.rows() == a.cols() && hermiticity_error(a) <= tol;
}

void require_square(const Operator& a, std::string_view what) {
  if (a.rows() != a.cols() || a.rows() == 0)
    throw Error(Errc::invalid_operator,
                fmt::format("{} must be a non-empty square matrix, got {}x{}",
                            what, a.rows(), a.cols()));
}

void require_hermitian(const Operator& a, std::string_view what, double tol) {
  require_square(a, what);
  const double err = hermiticity_error(a);
  if (err > tol)
    throw Error(Errc::invalid_operator,
                fmt::format("{} is not Hermitian (deviation {:.3g} > {:.3g})",
                            what, err, tol));
}

void require_same_dim(const Operator& a, const Operator& b,
                      std::string_view what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(Errc::dimension_mismatch,
                fmt::format("{}: dimension mismatch ({}x{} vs {}x{})", what,
                            a.rows(), a.cols(), b.rows(), b.cols()));
}

StaticFrame::StaticFrame(const Operator& h0, double herm_tol) {
  require_hermitian(h0, "drift Hamiltonian", herm_tol);
  Eigen::SelfAdjointEigenSolver<Operator> eig(h0);
  energies_ = eig.eigenvalues();
  basis_ = eig.eigenvectors();
}

Operator StaticFrame::propagator(double t) const {
  const Eigen::VectorXcd phases =
      (energies_.cast<Complex>() * Complex(0.0, -t)).array().exp();
  return basis_ * phases.asDiagonal() * basis_.adjoint();
}

Operator StaticFrame::to_rotating(const Operator& a, double t) const {
  const Operator u = propagator(t);
  return u.adjoint() * a * u;
}

Operator StaticFrame::to_lab(const Operator& a, double t) const {
  const Operator u = propagator(t);
  return u * a * u.adjoint();
}

Operator static_propagator(const Operator& h0, double t, double herm_tol) {
  if (!std::isfinite(t))
    throw Error(Errc::invalid_argument, "propagation time must be finite");
  return StaticFrame(h0, herm_tol).propagator(t);
}

Operator commutator(const Operator& a, const Operator& b) {
  require_same_dim(a, b, "commutator");
  return a * b - b * a;
}

DensityMatrix::DensityMatrix(Operator op, double trace_tol, double herm_tol)
    : op_(std::move(op)) {
  require_square(op_, "density matrix");
  const Complex tr = op_.trace();
  if (std::abs(tr.real() - 1.0) > trace_tol ||
      std::abs(tr.imag()) > std::max(trace_tol, 1e-12))
    throw Error(Errc::corrupted_state,
                fmt::format("density matrix trace {}{:+}i is not 1",
                            tr.real(), tr.imag()));
  const double herm = hermiticity_error(op_);
  if (herm > herm_tol)
    throw Error(Errc::corrupted_state,
                fmt::format("density matrix not Hermitian (deviation {:.3g})",
                            herm));
}

DensityMatrix DensityMatrix::pure(const StateVector& psi) {
  const double norm = psi.norm();
  if (norm == 0.0)
    throw Error(Errc::invalid_argument, "pure state vector has zero norm");
  const StateVector u = psi / norm;
  return DensityMatrix(u * u.adjoint());
}

double DensityMatrix::min_eigenvalue() const {
  // Eigen only reads the lower triangle; symmetrize so that tiny
  // anti-Hermitian roundoff does not bias the result.
  const Operator h = 0.5 * (op_ + op_.adjoint());
  return Eigen::SelfAdjointEigenSolver<Operator>(h, Eigen::EigenvaluesOnly)
      .eigenvalues()
      .minCoeff();
}

double expectation(const Operator& obs, const Operator& rho,
                   double imag_tol) {
  require_same_dim(obs, rho, "expectation");
  const Complex value = (obs * rho).trace();
  if (std::abs(value.imag()) > imag_tol)
    throw Error(Errc::numerical_consistency,
                fmt::format("expectation value has imaginary part {:.3g}",
                            value.imag()));
  return value.real();
}

double expectation(const Operator& obs, const DensityMatrix& rho,
                   double imag_tol) {
  return expectation(obs, rho.op(), imag_tol);
}

StateVector pauli_eigenstate(std::string_view label) {
  const double r = 1.0 / std::sqrt(2.0);
  StateVector psi(2);
  if (label == "x+") psi << r, r;
  else if (label == "x-") psi << r, -r;
  else if (label == "y+") psi << r, Complex(0, r);
  else if (label == "y-") psi << r, Complex(0, -r);
  else if (label == "z+") psi << 1, 0;
  else if (label == "z-") psi << 0, 1;
  else
    throw Error(Errc::invalid_argument,
                fmt::format("unknown Pauli eigenstate label '{}'", label));
  return psi;
}

}  // namespace qpce

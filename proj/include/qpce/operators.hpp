#pragma once

#include <complex>
#include <string_view>

#include <Eigen/Dense>

namespace qpce {

using Complex = std::complex<double>;
using Operator = Eigen::MatrixXcd;
using StateVector = Eigen::VectorXcd;

/// Default numerical tolerances. All of them can be overridden from the
/// `[tolerances]` section of a run configuration.
struct Tolerances {
  double hermitian = 1e-12;
  double unitary = 1e-10;
  double trace = 1e-10;
  double expectation_imag = 1e-10;
  double positivity = 1e-9;
};

namespace pauli {
Operator identity();
Operator x();
Operator y();
Operator z();
}  // namespace pauli

/// max_jk |A_jk - conj(A_kj)|
double hermiticity_error(const Operator& a);
bool is_hermitian(const Operator& a, double tol = Tolerances{}.hermitian);
void require_square(const Operator& a, std::string_view what);
void require_hermitian(const Operator& a, std::string_view what,
                       double tol = Tolerances{}.hermitian);
void require_same_dim(const Operator& a, const Operator& b,
                      std::string_view what);

/// U0(t) = exp(-i h0 t) for a static Hermitian generator, built from its
/// eigendecomposition.
Operator static_propagator(const Operator& h0, double t,
                           double herm_tol = Tolerances{}.hermitian);

/// Rotating frame of a static drift Hamiltonian. The eigendecomposition is
/// done once; propagators and frame changes at arbitrary times are cheap.
class StaticFrame {
 public:
  explicit StaticFrame(const Operator& h0,
                       double herm_tol = Tolerances{}.hermitian);

  Eigen::Index dim() const { return energies_.size(); }
  const Eigen::VectorXd& energies() const { return energies_; }
  const Operator& eigenvectors() const { return basis_; }

  Operator propagator(double t) const;
  /// U0(t)^dagger a U0(t)
  Operator to_rotating(const Operator& a, double t) const;
  /// U0(t) a U0(t)^dagger
  Operator to_lab(const Operator& a, double t) const;

 private:
  Eigen::VectorXd energies_;
  Operator basis_;
};

/// [a, b]
Operator commutator(const Operator& a, const Operator& b);

/// Unit-trace Hermitian operator. Trace and Hermiticity are checked on
/// construction; positivity is only reported via min_eigenvalue() since
/// truncated expansions need not preserve it.
class DensityMatrix {
 public:
  explicit DensityMatrix(Operator op, double trace_tol = Tolerances{}.trace,
                         double herm_tol = Tolerances{}.hermitian);

  static DensityMatrix pure(const StateVector& psi);

  const Operator& op() const { return op_; }
  Eigen::Index dim() const { return op_.rows(); }
  double min_eigenvalue() const;
  bool is_positive(double tol = Tolerances{}.positivity) const {
    return min_eigenvalue() >= -tol;
  }

 private:
  Operator op_;
};

/// tr(obs * rho). Throws numerical_consistency if the imaginary part exceeds
/// imag_tol.
double expectation(const Operator& obs, const Operator& rho,
                   double imag_tol = Tolerances{}.expectation_imag);
double expectation(const Operator& obs, const DensityMatrix& rho,
                   double imag_tol = Tolerances{}.expectation_imag);

/// Eigenvector of a single-qubit Pauli operator, labelled "x+", "x-", "y+",
/// "y-", "z+" or "z-".
StateVector pauli_eigenstate(std::string_view label);

}  // namespace qpce

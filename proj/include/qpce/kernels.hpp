#pragma once

#include <span>

#include "qpce/multi_index.hpp"
#include "qpce/operators.hpp"

namespace qpce::kernels {

/// Hierarchy right-hand side on a flat coefficient buffer (N blocks of
/// dim x dim, column-major):
///
///   out_m = -i [vt, sum_{(n, l) in row m} amplitudes[n] * G_mnl * in_l]
///
/// The serial version is the reference; the OpenMP version splits rows
/// across threads and performs exactly the same floating-point operations
/// per row, so both produce bit-identical output.
void hierarchy_apply_serial(const GalerkinCouplings& couplings,
                            std::span<const double> amplitudes,
                            const Operator& vt, std::span<const Complex> in,
                            std::span<Complex> out);

void hierarchy_apply_omp(const GalerkinCouplings& couplings,
                         std::span<const double> amplitudes,
                         const Operator& vt, std::span<const Complex> in,
                         std::span<Complex> out);

}  // namespace qpce::kernels

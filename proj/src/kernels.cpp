#include "qpce/kernels.hpp"

#include <vector>

#include "qpce/errors.hpp"

namespace qpce::kernels {

namespace {

void check_shapes(const GalerkinCouplings& couplings,
                  std::span<const double> amplitudes, const Operator& vt,
                  std::span<const Complex> in, std::span<Complex> out) {
  const auto dd = static_cast<std::size_t>(vt.rows() * vt.cols());
  if (amplitudes.size() != couplings.dimension)
    throw Error(Errc::dimension_mismatch,
                "hierarchy: one amplitude per stochastic mode is required");
  if (in.size() != couplings.size() * dd || out.size() != in.size())
    throw Error(Errc::dimension_mismatch,
                "hierarchy: coefficient buffer does not match the basis");
}

inline void apply_row(const GalerkinCouplings& couplings,
                      std::span<const double> amplitudes, const Complex* v,
                      Eigen::Index d, const Complex* in, Complex* out,
                      Complex* psi, std::size_t m) {
  const auto dd = static_cast<std::size_t>(d * d);
  for (std::size_t k = 0; k < dd; ++k) psi[k] = 0.0;
  for (const Coupling& c : couplings.row(m)) {
    const double scale = amplitudes[c.mode] * c.weight;
    const Complex* src = in + static_cast<std::size_t>(c.l) * dd;
    for (std::size_t k = 0; k < dd; ++k) psi[k] += scale * src[k];
  }
  Complex* dst = out + m * dd;
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      Complex acc = 0.0;
      for (Eigen::Index k = 0; k < d; ++k)
        acc += v[i + k * d] * psi[k + j * d] - psi[i + k * d] * v[k + j * d];
      // -i * acc
      dst[i + j * d] = Complex(acc.imag(), -acc.real());
    }
  }
}

}  // namespace

void hierarchy_apply_serial(const GalerkinCouplings& couplings,
                            std::span<const double> amplitudes,
                            const Operator& vt, std::span<const Complex> in,
                            std::span<Complex> out) {
  check_shapes(couplings, amplitudes, vt, in, out);
  const Eigen::Index d = vt.rows();
  std::vector<Complex> psi(static_cast<std::size_t>(d * d));
  for (std::size_t m = 0; m < couplings.size(); ++m)
    apply_row(couplings, amplitudes, vt.data(), d, in.data(), out.data(),
              psi.data(), m);
}

void hierarchy_apply_omp(const GalerkinCouplings& couplings,
                         std::span<const double> amplitudes,
                         const Operator& vt, std::span<const Complex> in,
                         std::span<Complex> out) {
  check_shapes(couplings, amplitudes, vt, in, out);
  const Eigen::Index d = vt.rows();
  const auto rows = static_cast<std::ptrdiff_t>(couplings.size());
#pragma omp parallel
  {
    std::vector<Complex> psi(static_cast<std::size_t>(d * d));
#pragma omp for schedule(static)
    for (std::ptrdiff_t m = 0; m < rows; ++m)
      apply_row(couplings, amplitudes, vt.data(), d, in.data(), out.data(),
                psi.data(), static_cast<std::size_t>(m));
  }
}

}  // namespace qpce::kernels

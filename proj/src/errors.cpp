#include "qpce/errors.hpp"

namespace qpce {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_operator: return "invalid-operator";
    case Errc::dimension_mismatch: return "dimension-mismatch";
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::numerical_consistency: return "numerical-consistency";
    case Errc::kernel_not_psd: return "kernel-not-positive-semidefinite";
    case Errc::degenerate_mode: return "degenerate-mode";
    case Errc::capacity: return "capacity";
    case Errc::insufficient_modes: return "insufficient-modes";
    case Errc::propagation_diverged: return "propagation-diverged";
    case Errc::corrupted_state: return "corrupted-state";
    case Errc::config: return "config";
    case Errc::io: return "io";
    case Errc::unconverged: return "unconverged";
  }
  return "unknown";
}

int Error::exit_code() const noexcept {
  switch (code_) {
    case Errc::numerical_consistency:
    case Errc::kernel_not_psd:
    case Errc::degenerate_mode:
    case Errc::propagation_diverged:
    case Errc::corrupted_state:
      return 2;
    case Errc::unconverged:
      return 3;
    default:
      return 1;
  }
}

}  // namespace qpce

#pragma once

#include <stdexcept>
#include <string>

namespace qpce {

enum class Errc {
  invalid_operator,
  dimension_mismatch,
  invalid_argument,
  numerical_consistency,
  kernel_not_psd,
  degenerate_mode,
  capacity,
  insufficient_modes,
  propagation_diverged,
  corrupted_state,
  config,
  io,
  unconverged,
};

const char* errc_name(Errc code) noexcept;

/// Every failure raised by the library carries one of the codes above.
/// The CLI maps them onto process exit codes with exit_code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

  /// 1 = validation, 2 = numerical, 3 = unconverged.
  int exit_code() const noexcept;

 private:
  Errc code_;
};

}  // namespace qpce

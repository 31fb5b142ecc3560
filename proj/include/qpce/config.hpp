#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qpce/model.hpp"
#include "qpce/monte_carlo.hpp"
#include "qpce/operators.hpp"

namespace qpce {

enum class NoiseKind { ou, tabulated };

/// Everything a CLI run needs. Text form is a strict INI dialect:
///
///   [model]        h0, v, tau (required), initial_state = x+
///   [noise]        kind = ou | tabulated; alpha, tau_c (ou); table (tabulated)
///   [kle]          grid_size = 400, candidate_modes = auto, S = 3
///   [pce]          P = 9, dt_max = auto (tau/2000), output_points = 200
///   [mc]           n_traj = 20000, dt = auto (tau/1000), seed, sampler =
///                  exact_ou | kle, batch = 250, stderr_target = 0.005
///   [observable]   op = X
///   [output]       prefix = qpce
///   [sweep]        orders = 1,3,5,7,9; dimensions = (empty: kle.S)
///   [tolerances]   hermitian = 1e-12, trace = 1e-10
///
/// Operators are Pauli combinations such as `1*X + 0.5*Z` or `20 XZ`
/// (multi-letter words are Kronecker products), `0` for the zero operator,
/// or explicit matrices `[1, 0; 0, -1]` with entries like `2`, `-i`, `1+2i`.
struct RunConfig {
  struct Model {
    std::string h0;
    std::string v;
    double tau = 0.0;
    std::string initial_state = "x+";
    bool operator==(const Model&) const = default;
  } model;

  struct Noise {
    NoiseKind kind = NoiseKind::ou;
    double alpha = 0.0;
    double tau_c = 0.0;
    std::string table;
    bool operator==(const Noise&) const = default;
  } noise;

  struct Kle {
    std::size_t grid_size = 400;
    std::optional<std::size_t> candidate_modes;
    std::size_t S = 3;
    bool operator==(const Kle&) const = default;
  } kle;

  struct Pce {
    unsigned P = 9;
    std::optional<double> dt_max;
    std::size_t output_points = 200;
    bool operator==(const Pce&) const = default;
  } pce;

  struct Mc {
    std::size_t n_traj = 20000;
    std::optional<double> dt;
    std::uint64_t seed = 20130101;
    NoiseSampler sampler = NoiseSampler::exact_ou;
    std::size_t batch = 250;
    double stderr_target = 5e-3;
    bool operator==(const Mc&) const = default;
  } mc;

  struct Observable {
    std::string op = "X";
    bool operator==(const Observable&) const = default;
  } observable;

  struct Output {
    std::string prefix = "qpce";
    bool operator==(const Output&) const = default;
  } output;

  struct Sweep {
    std::vector<unsigned> orders{1, 3, 5, 7, 9};
    std::vector<std::size_t> dimensions;
    bool operator==(const Sweep&) const = default;
  } sweep;

  struct Tol {
    double hermitian = 1e-12;
    double trace = 1e-10;
    bool operator==(const Tol&) const = default;
  } tolerances;

  /// Directory that relative paths (noise table) are resolved against.
  std::filesystem::path base_dir;

  bool operator==(const RunConfig& other) const {
    return model == other.model && noise == other.noise && kle == other.kle &&
           pce == other.pce && mc == other.mc &&
           observable == other.observable && output == other.output &&
           sweep == other.sweep && tolerances == other.tolerances;
  }
};

/// Errors carry Errc::config and a "line N:" prefix.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);
/// Canonical text form; parse_config(emit_config(c)) == c.
std::string emit_config(const RunConfig& config);

/// Parses an operator spec. `zero_dim` is the dimension used for "0".
Operator parse_operator(std::string_view spec, Eigen::Index zero_dim = 2);

/// Product of single-qubit Pauli eigenstates, e.g. "x+" or "x+ z-".
DensityMatrix parse_initial_state(std::string_view spec);

StochasticModel build_model(const RunConfig& config);
CorrelationKernel build_kernel(const RunConfig& config);
Operator build_observable(const RunConfig& config);
MCConfig build_mc_config(const RunConfig& config);

/// Uniform output grid of `points` times on [0, tau].
std::vector<double> output_grid(double tau, std::size_t points);

}  // namespace qpce

#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qpce/config.hpp"
#include "qpce/kle.hpp"
#include "qpce/monte_carlo.hpp"

namespace qpce {

/// Candidate modes of the configured kernel plus the rate-ranked selection.
struct KleRun {
  std::vector<KLMode> candidates;
  TruncatedKLE selected;
};

KleRun run_kle(const RunConfig& config, const StochasticModel& model,
               std::size_t S);

struct PceRun {
  std::size_t equations = 0;
  std::vector<double> times;
  std::vector<double> obs_mean;
  std::vector<double> obs_variance;
  std::vector<double> trace_error;
  std::vector<double> hermiticity_error;
  std::vector<double> min_eigenvalue;
  double seconds = 0.0;
};

/// KLE, hierarchy assembly and RK4 propagation at order P with S modes.
/// `seconds` covers the whole pipeline.
PceRun run_pce(const RunConfig& config, unsigned P, std::size_t S,
               bool parallel = true);

struct McRun {
  MCEnsemble ensemble;
  double seconds = 0.0;
};

McRun run_mc(const RunConfig& config);

struct CompareSummary {
  std::size_t equations = 0;
  std::size_t trajectories = 0;
  bool converged = false;
  std::size_t points = 0;
  std::size_t within_band = 0;
  /// max_t |pce - mc| / mc_stderr
  double max_ratio = 0.0;
  double max_abs_diff = 0.0;
  double pce_seconds = 0.0;
  double mc_seconds = 0.0;
};

struct CompareRun {
  PceRun pce;
  McRun mc;
  CompareSummary summary;
};

CompareRun run_compare(const RunConfig& config);

struct SweepPoint {
  unsigned P = 0;
  std::size_t S = 0;
  PceRun run;
  /// max_t |obs_mean - reference obs_mean|
  double max_deviation = 0.0;
};

/// Every (P, S) in orders x dimensions, run concurrently. The reference is
/// the point with the largest S and, within it, the largest P.
std::vector<SweepPoint> run_sweep(const RunConfig& config);

struct AppOptions {
  std::optional<std::string> out_prefix;
  std::optional<std::uint64_t> seed;
  bool allow_unconverged = false;
};

/// Runs one subcommand and writes its CSV files. Returns the process exit
/// status; errors propagate as qpce::Error.
int run_command(std::string_view subcommand, RunConfig config,
                const AppOptions& options, std::ostream& log);

/// Replaces `path` with `contents` through a temporary file and a rename.
void write_atomic(const std::filesystem::path& path, std::string_view contents);

/// `#`-prefixed metadata block: version, timestamp, command, seed, frame
/// convention and the full canonical config.
std::string metadata_header(std::string_view command, const RunConfig& config);

}  // namespace qpce

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qpce/kle.hpp"
#include "qpce/model.hpp"
#include "qpce/operators.hpp"
#include "qpce/rng.hpp"

namespace qpce {

enum class NoiseSampler { exact_ou, truncated_kle };

struct MCConfig {
  std::size_t n_traj = 20000;
  /// Largest propagation step; 0 selects horizon / 1000. Must be <= tau/100.
  double dt = 0.0;
  std::uint64_t seed = 20130101;
  NoiseSampler sampler = NoiseSampler::exact_ou;
  /// Trajectories per convergence check.
  std::size_t batch = 250;
  /// Stop once the largest observable standard error drops to this value.
  double stderr_target = 5e-3;
  /// Run each batch with the OpenMP kernel.
  bool parallel = true;
};

struct MCEnsemble {
  std::vector<double> times;
  /// Lab-frame ensemble mean at each output time.
  std::vector<DensityMatrix> mean_rho;
  std::vector<double> obs_mean;
  std::vector<double> obs_stderr;
  std::size_t n_used = 0;
  bool converged = false;
};

/// Exact AR(1) recursion of the stationary OU process on an ascending grid:
/// Omega(t0) ~ N(0, alpha^2), Omega(t_{k+1}) = r Omega(t_k) +
/// alpha sqrt(1 - r^2) z_k with r = exp(-(t_{k+1} - t_k) / tau_c).
std::vector<double> sample_ou_path(const OrnsteinUhlenbeck& ou,
                                   std::span<const double> times,
                                   CounterRng& rng);

/// Rotating-frame evolution of one noise realization sampled at `times`
/// (times[0] is the initial time). Each step applies the exact unitary of
/// the piecewise-constant generator Omega_mid V~(t_mid), with Omega_mid the
/// mean of the two endpoint samples. Returns rho~ at every grid time.
std::vector<Operator> propagate_trajectory(const StochasticModel& model,
                                           std::span<const double> times,
                                           std::span<const double> path,
                                           const DensityMatrix& rho0);

/// Everything about a Monte Carlo run that is shared by all trajectories:
/// the fine propagation grid, per-step generator factorizations, the
/// rotating-frame observable and (for the KLE sampler) the mode samples.
class TrajectoryPlan {
 public:
  TrajectoryPlan(const StochasticModel& model, const DensityMatrix& rho0,
                 const Operator& obs, std::span<const double> t_out,
                 const MCConfig& config, const TruncatedKLE* kle = nullptr);

  std::size_t outputs() const { return output_step_.size(); }
  std::size_t steps() const { return grid_.size() - 1; }
  Eigen::Index dim() const { return dim_; }
  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& output_times() const { return t_out_; }

  struct Result {
    std::vector<Complex> rho;  // outputs() blocks of dim x dim, rotating frame
    std::vector<double> obs;   // outputs() values
  };

  /// Trajectory `index` of the run; a pure function of (seed, index).
  void run(std::uint64_t index, Result& out) const;

  /// Noise path of trajectory `index` on grid().
  std::vector<double> noise_path(std::uint64_t index) const;

  const StochasticModel& model() const { return *model_; }

 private:
  struct Step {
    // d == 2: V~(t_mid) = a0 I + a . sigma, stored as |a| and a / |a|.
    double norm = 0.0;
    double nx = 0.0, ny = 0.0, nz = 0.0;
    // d > 2: V~(t_mid) = W diag(e) W^dagger.
    Eigen::VectorXd energies;
    Operator basis;
  };

  void propagate_path(std::span<const double> path, Result& out) const;

  const StochasticModel* model_;
  MCConfig config_;
  Eigen::Index dim_;
  Operator rho0_;
  std::vector<double> t_out_;
  std::vector<double> grid_;
  std::vector<std::size_t> output_step_;  // grid index of each output time
  std::vector<Step> steps_;
  std::vector<Operator> obs_rotating_;
  std::vector<std::vector<double>> kle_amplitudes_;  // per mode, on grid_
};

/// Kernels over a batch of consecutive trajectories [first, first + out.size()).
/// The OpenMP version writes the same per-index results as the serial one.
void run_batch_serial(const TrajectoryPlan& plan, std::uint64_t first,
                      std::span<TrajectoryPlan::Result> out);
void run_batch_omp(const TrajectoryPlan& plan, std::uint64_t first,
                   std::span<TrajectoryPlan::Result> out);

/// Trajectory average in batches, stopping once the largest standard error
/// of the observable reaches config.stderr_target or n_traj is exhausted.
/// Results are bit-identical for any thread count.
MCEnsemble mc_average(const StochasticModel& model, const DensityMatrix& rho0,
                      const Operator& obs, const MCConfig& config,
                      std::span<const double> t_out,
                      const TruncatedKLE* kle = nullptr);

}  // namespace qpce

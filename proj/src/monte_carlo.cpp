#include "qpce/monte_carlo.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "qpce/errors.hpp"

namespace qpce {

std::vector<double> sample_ou_path(const OrnsteinUhlenbeck& ou,
                                   std::span<const double> times,
                                   CounterRng& rng) {
  std::vector<double> path(times.size(), 0.0);
  if (times.empty()) return path;
  std::normal_distribution<double> normal;
  path[0] = ou.alpha * normal(rng);
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double r = std::exp(-(times[k] - times[k - 1]) / ou.tau_c);
    path[k] = r * path[k - 1] +
              ou.alpha * std::sqrt(std::max(0.0, 1.0 - r * r)) * normal(rng);
  }
  return path;
}

std::vector<Operator> propagate_trajectory(const StochasticModel& model,
                                           std::span<const double> times,
                                           std::span<const double> path,
                                           const DensityMatrix& rho0) {
  if (path.size() != times.size())
    throw Error(Errc::dimension_mismatch,
                "propagate_trajectory: path must be sampled on the time grid");
  require_same_dim(rho0.op(), model.h0(), "propagate_trajectory");
  std::vector<Operator> out;
  out.reserve(times.size());
  Operator rho = rho0.op();
  if (!times.empty()) out.push_back(rho);
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double dt = times[k] - times[k - 1];
    const double t_mid = times[k - 1] + 0.5 * dt;
    const double omega = 0.5 * (path[k - 1] + path[k]);
    const Operator h = omega * rotating_frame_potential(model, t_mid);
    const Operator u = static_propagator(h, dt, 1e-9);
    rho = u * rho * u.adjoint();
    out.push_back(rho);
  }
  return out;
}

namespace {

void validate(const StochasticModel& model, const MCConfig& config,
              const TruncatedKLE* kle) {
  if (config.n_traj < 2)
    throw Error(Errc::invalid_argument, "Monte Carlo needs n_traj >= 2");
  if (config.batch == 0)
    throw Error(Errc::invalid_argument, "Monte Carlo batch must be >= 1");
  if (!(config.stderr_target > 0.0))
    throw Error(Errc::invalid_argument, "stderr target must be positive");
  const double dt = config.dt > 0.0 ? config.dt : model.horizon() / 1000.0;
  if (!(dt <= model.horizon() / 100.0 * (1.0 + 1e-12)))
    throw Error(Errc::invalid_argument,
                fmt::format("Monte Carlo dt={} exceeds tau/100={}", dt,
                            model.horizon() / 100.0));
  if (config.sampler == NoiseSampler::exact_ou && !model.kernel().ou())
    throw Error(Errc::invalid_argument,
                "the exact OU sampler needs an Ornstein-Uhlenbeck kernel");
  if (config.sampler == NoiseSampler::truncated_kle && kle == nullptr)
    throw Error(Errc::invalid_argument,
                "the truncated-KLE sampler needs a truncated KLE");
}

}  // namespace

TrajectoryPlan::TrajectoryPlan(const StochasticModel& model,
                               const DensityMatrix& rho0, const Operator& obs,
                               std::span<const double> t_out,
                               const MCConfig& config, const TruncatedKLE* kle)
    : model_(&model),
      config_(config),
      dim_(model.dim()),
      rho0_(rho0.op()),
      t_out_(t_out.begin(), t_out.end()) {
  validate(model, config, kle);
  require_same_dim(rho0.op(), model.h0(), "Monte Carlo initial state");
  require_hermitian(obs, "observable");
  require_same_dim(obs, model.h0(), "Monte Carlo observable");
  if (t_out_.empty())
    throw Error(Errc::invalid_argument, "Monte Carlo needs output times");
  const double tau = model.horizon();
  if (t_out_.front() < 0.0 || t_out_.back() > tau * (1.0 + 1e-12))
    throw Error(Errc::invalid_argument, "output times must lie in [0, tau]");
  for (std::size_t i = 1; i < t_out_.size(); ++i)
    if (!(t_out_[i] > t_out_[i - 1]))
      throw Error(Errc::invalid_argument, "output times must be ascending");

  const double dt = config.dt > 0.0 ? config.dt : tau / 1000.0;
  grid_.push_back(0.0);
  double prev = 0.0;
  for (double t : t_out_) {
    if (t > prev) {
      const auto n = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::ceil((t - prev) / dt - 1e-9)));
      const double h = (t - prev) / static_cast<double>(n);
      for (std::size_t s = 1; s < n; ++s)
        grid_.push_back(prev + h * static_cast<double>(s));
      grid_.push_back(t);
    }
    output_step_.push_back(grid_.size() - 1);
    prev = t;
  }

  steps_.resize(grid_.size() - 1);
  const auto& v = model.v();
#pragma omp parallel for schedule(static)
  for (std::size_t k = 0; k < steps_.size(); ++k) {
    const double t_mid = 0.5 * (grid_[k] + grid_[k + 1]);
    const Operator vt = model.frame().to_rotating(v, t_mid);
    Step& step = steps_[k];
    if (dim_ == 2) {
      const double ax = vt(0, 1).real();
      const double ay = -vt(0, 1).imag();
      const double az = 0.5 * (vt(0, 0).real() - vt(1, 1).real());
      step.norm = std::sqrt(ax * ax + ay * ay + az * az);
      if (step.norm > 0.0) {
        step.nx = ax / step.norm;
        step.ny = ay / step.norm;
        step.nz = az / step.norm;
      }
    } else {
      Eigen::SelfAdjointEigenSolver<Operator> eig(0.5 * (vt + vt.adjoint()));
      step.energies = eig.eigenvalues();
      step.basis = eig.eigenvectors();
    }
  }

  obs_rotating_.reserve(t_out_.size());
  for (double t : t_out_) obs_rotating_.push_back(model.frame().to_rotating(obs, t));

  if (config.sampler == NoiseSampler::truncated_kle) {
    for (const auto& mode : kle->modes) {
      if (!(mode.eigenvalue > 1e-12 * mode.leading_eigenvalue) ||
          mode.eigenvalue <= 0.0) {
        kle_amplitudes_.emplace_back(grid_.size(), 0.0);
        continue;
      }
      auto g = evaluate_mode(mode, model.kernel(), grid_);
      for (double& x : g) x *= std::sqrt(mode.eigenvalue);
      kle_amplitudes_.push_back(std::move(g));
    }
  }
}

std::vector<double> TrajectoryPlan::noise_path(std::uint64_t index) const {
  CounterRng rng(config_.seed, index);
  if (config_.sampler == NoiseSampler::exact_ou)
    return sample_ou_path(*model_->kernel().ou(), grid_, rng);

  std::normal_distribution<double> normal;
  std::vector<double> path(grid_.size(), 0.0);
  for (const auto& amps : kle_amplitudes_) {
    const double xi = normal(rng);
    for (std::size_t k = 0; k < path.size(); ++k) path[k] += amps[k] * xi;
  }
  return path;
}

void TrajectoryPlan::propagate_path(std::span<const double> path,
                                    Result& out) const {
  const auto dd = static_cast<std::size_t>(dim_ * dim_);
  out.rho.resize(outputs() * dd);
  out.obs.resize(outputs());
  std::size_t next = 0;

  auto record = [&](std::size_t k, const auto& rho) {
    while (next < output_step_.size() && output_step_[next] == k) {
      std::copy(rho.data(), rho.data() + dd, out.rho.begin() + next * dd);
      out.obs[next] = (obs_rotating_[next] * rho).trace().real();
      ++next;
    }
  };

  if (dim_ == 2) {
    Eigen::Matrix2cd rho = rho0_;
    record(0, rho);
    for (std::size_t k = 0; k < steps_.size(); ++k) {
      const Step& s = steps_[k];
      const double omega = 0.5 * (path[k] + path[k + 1]);
      const double theta = omega * s.norm * (grid_[k + 1] - grid_[k]);
      const double c = std::cos(theta);
      const double sn = std::sin(theta);
      // exp(-i theta n.sigma) = cos(theta) I - i sin(theta) n.sigma
      Eigen::Matrix2cd u;
      u(0, 0) = Complex(c, -sn * s.nz);
      u(1, 1) = Complex(c, sn * s.nz);
      u(0, 1) = Complex(-sn * s.ny, -sn * s.nx);
      u(1, 0) = Complex(sn * s.ny, -sn * s.nx);
      rho = (u * rho * u.adjoint()).eval();
      record(k + 1, rho);
    }
    return;
  }

  Operator rho = rho0_;
  record(0, rho);
  for (std::size_t k = 0; k < steps_.size(); ++k) {
    const Step& s = steps_[k];
    const double omega = 0.5 * (path[k] + path[k + 1]);
    const double dt = grid_[k + 1] - grid_[k];
    const Eigen::VectorXcd phases =
        (s.energies.cast<Complex>() * Complex(0.0, -omega * dt)).array().exp();
    const Operator u = s.basis * phases.asDiagonal() * s.basis.adjoint();
    rho = u * rho * u.adjoint();
    record(k + 1, rho);
  }
}

void TrajectoryPlan::run(std::uint64_t index, Result& out) const {
  const auto path = noise_path(index);
  propagate_path(path, out);
}

void run_batch_serial(const TrajectoryPlan& plan, std::uint64_t first,
                      std::span<TrajectoryPlan::Result> out) {
  for (std::size_t i = 0; i < out.size(); ++i) plan.run(first + i, out[i]);
}

void run_batch_omp(const TrajectoryPlan& plan, std::uint64_t first,
                   std::span<TrajectoryPlan::Result> out) {
  const auto count = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < count; ++i)
    plan.run(first + static_cast<std::uint64_t>(i),
             out[static_cast<std::size_t>(i)]);
}

namespace {

struct Sums {
  std::vector<Complex> rho;
  std::vector<double> obs;     // sum of (obs - shift)
  std::vector<double> obs_sq;  // sum of (obs - shift)^2
};

// Pairwise sum over [lo, hi); the tree shape depends only on the range.
// Observables are shifted by trajectory 0's values to avoid cancellation
// in the variance.
Sums pairwise(std::span<const TrajectoryPlan::Result> results,
              std::span<const double> shift, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) {
    const auto& r = results[lo];
    Sums s{r.rho, r.obs, r.obs};
    for (std::size_t i = 0; i < s.obs.size(); ++i) {
      s.obs[i] -= shift[i];
      s.obs_sq[i] = s.obs[i] * s.obs[i];
    }
    return s;
  }
  const std::size_t mid = lo + (hi - lo) / 2;
  Sums a = pairwise(results, shift, lo, mid);
  const Sums b = pairwise(results, shift, mid, hi);
  for (std::size_t i = 0; i < a.rho.size(); ++i) a.rho[i] += b.rho[i];
  for (std::size_t i = 0; i < a.obs.size(); ++i) {
    a.obs[i] += b.obs[i];
    a.obs_sq[i] += b.obs_sq[i];
  }
  return a;
}

}  // namespace

MCEnsemble mc_average(const StochasticModel& model, const DensityMatrix& rho0,
                      const Operator& obs, const MCConfig& config,
                      std::span<const double> t_out, const TruncatedKLE* kle) {
  const TrajectoryPlan plan(model, rho0, obs, t_out, config, kle);
  const std::size_t n_out = plan.outputs();
  const auto d = plan.dim();
  const auto dd = static_cast<std::size_t>(d * d);

  Sums total{std::vector<Complex>(n_out * dd, Complex(0.0)),
             std::vector<double>(n_out, 0.0), std::vector<double>(n_out, 0.0)};
  std::vector<TrajectoryPlan::Result> results;
  std::vector<double> stderr_obs(n_out, 0.0);
  std::vector<double> shift(n_out, 0.0);

  MCEnsemble ens;
  std::size_t used = 0;
  while (used < config.n_traj) {
    const std::size_t count = std::min(config.batch, config.n_traj - used);
    results.resize(count);
    if (config.parallel)
      run_batch_omp(plan, used, results);
    else
      run_batch_serial(plan, used, results);
    if (used == 0) shift = results.front().obs;
    const Sums batch = pairwise(results, shift, 0, count);
    for (std::size_t i = 0; i < total.rho.size(); ++i) total.rho[i] += batch.rho[i];
    for (std::size_t i = 0; i < n_out; ++i) {
      total.obs[i] += batch.obs[i];
      total.obs_sq[i] += batch.obs_sq[i];
    }
    used += count;
    if (used < 2) continue;

    const double n = static_cast<double>(used);
    double worst = 0.0;
    for (std::size_t i = 0; i < n_out; ++i) {
      const double d = total.obs[i];
      const double var = std::max(0.0, (total.obs_sq[i] - d * d / n) / (n - 1.0));
      stderr_obs[i] = std::sqrt(var / n);
      worst = std::max(worst, stderr_obs[i]);
    }
    if (worst <= config.stderr_target) {
      ens.converged = true;
      break;
    }
  }

  const double n = static_cast<double>(used);
  ens.n_used = used;
  ens.times = plan.output_times();
  ens.obs_stderr = stderr_obs;
  ens.obs_mean.resize(n_out);
  ens.mean_rho.reserve(n_out);
  for (std::size_t i = 0; i < n_out; ++i) {
    ens.obs_mean[i] = shift[i] + total.obs[i] / n;
    const Operator mean =
        Eigen::Map<const Operator>(total.rho.data() + i * dd, d, d) / n;
    ens.mean_rho.emplace_back(model.frame().to_lab(mean, ens.times[i]), 1e-10,
                              1e-10);
  }
  return ens;
}

}  // namespace qpce

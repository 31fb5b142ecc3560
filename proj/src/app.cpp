#include "qpce/app.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <ostream>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <unistd.h>

#include "qpce/errors.hpp"
#include "qpce/multi_index.hpp"
#include "qpce/pce.hpp"

namespace qpce {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::size_t candidate_count(const RunConfig& c, std::size_t S) {
  const std::size_t n = c.kle.candidate_modes.value_or(default_candidate_modes(S));
  return std::min(std::max(n, S), c.kle.grid_size);
}

std::filesystem::path out_path(const std::string& prefix, std::string_view suffix) {
  return prefix + std::string(suffix);
}

std::string pce_body(const PceRun& r) {
  std::string s = "t,obs_mean,obs_variance,trace_err,herm_err,min_eig\n";
  for (std::size_t i = 0; i < r.times.size(); ++i)
    s += fmt::format("{},{},{},{},{},{}\n", r.times[i], r.obs_mean[i],
                     r.obs_variance[i], r.trace_error[i],
                     r.hermiticity_error[i], r.min_eigenvalue[i]);
  return s;
}

}  // namespace

KleRun run_kle(const RunConfig& c, const StochasticModel& model, std::size_t S) {
  KleRun out;
  out.candidates = solve_fredholm(model.kernel(), model.horizon(),
                                  c.kle.grid_size, candidate_count(c, S));
  const auto rates =
      transition_rates(out.candidates, model.h0(), model.v(), model.horizon());
  out.selected = select_modes(out.candidates, rates, S);
  return out;
}

PceRun run_pce(const RunConfig& c, unsigned P, std::size_t S, bool parallel) {
  const auto start = Clock::now();
  const StochasticModel model = build_model(c);
  const Operator obs = build_observable(c);
  const DensityMatrix rho0 = parse_initial_state(c.model.initial_state);

  const KleRun kle = run_kle(c, model, S);
  auto basis = std::make_shared<const MultiIndexSet>(enumerate_indices(S, P));
  const GalerkinCouplings couplings = build_couplings(*basis);
  const PCEState initial = initial_pce_state(rho0, basis);

  PropagationOptions opts;
  opts.dt_max = c.pce.dt_max.value_or(0.0);
  opts.parallel = parallel;
  opts.invariant_tol = std::max(1e-8, c.tolerances.trace);

  PceRun r;
  r.equations = basis->size();
  r.times = output_grid(model.horizon(), c.pce.output_points);
  const auto states =
      propagate(initial, model, kle.selected, couplings, r.times, opts);
  for (const auto& st : states) {
    const DensityMatrix mean = mean_state(st, model);
    const StateDiagnostics diag = diagnose(st, initial);
    r.obs_mean.push_back(expectation(obs, mean));
    r.obs_variance.push_back(observable_variance(st, obs, model));
    r.trace_error.push_back(diag.trace_error);
    r.hermiticity_error.push_back(diag.hermiticity_error);
    r.min_eigenvalue.push_back(mean.min_eigenvalue());
  }
  r.seconds = seconds_since(start);
  return r;
}

McRun run_mc(const RunConfig& c) {
  const auto start = Clock::now();
  const StochasticModel model = build_model(c);
  const Operator obs = build_observable(c);
  const DensityMatrix rho0 = parse_initial_state(c.model.initial_state);
  const MCConfig mc = build_mc_config(c);
  const auto times = output_grid(model.horizon(), c.pce.output_points);

  McRun r;
  if (mc.sampler == NoiseSampler::truncated_kle) {
    const KleRun kle = run_kle(c, model, c.kle.S);
    r.ensemble = mc_average(model, rho0, obs, mc, times, &kle.selected);
  } else {
    r.ensemble = mc_average(model, rho0, obs, mc, times);
  }
  r.seconds = seconds_since(start);
  return r;
}

CompareRun run_compare(const RunConfig& c) {
  CompareRun r;
  r.pce = run_pce(c, c.pce.P, c.kle.S);
  r.mc = run_mc(c);
  auto& s = r.summary;
  const auto& e = r.mc.ensemble;
  s.equations = r.pce.equations;
  s.trajectories = e.n_used;
  s.converged = e.converged;
  s.points = e.times.size();
  s.pce_seconds = r.pce.seconds;
  s.mc_seconds = r.mc.seconds;
  for (std::size_t i = 0; i < s.points; ++i) {
    const double diff = std::abs(r.pce.obs_mean[i] - e.obs_mean[i]);
    s.max_abs_diff = std::max(s.max_abs_diff, diff);
    if (diff <= e.obs_stderr[i]) ++s.within_band;
    if (e.obs_stderr[i] > 0.0)
      s.max_ratio = std::max(s.max_ratio, diff / e.obs_stderr[i]);
    else if (diff > 0.0)
      s.max_ratio = std::numeric_limits<double>::infinity();
  }
  return r;
}

std::vector<SweepPoint> run_sweep(const RunConfig& c) {
  std::vector<std::size_t> dims = c.sweep.dimensions;
  if (dims.empty()) dims.push_back(c.kle.S);

  std::vector<SweepPoint> points;
  for (std::size_t S : dims)
    for (unsigned P : c.sweep.orders) points.push_back({P, S, {}, 0.0});

  std::vector<std::exception_ptr> errors(points.size());
  const auto n = static_cast<std::ptrdiff_t>(points.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      points[i].run = run_pce(c, points[i].P, points[i].S, false);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& err : errors)
    if (err) std::rethrow_exception(err);

  const auto ref = std::max_element(
      points.begin(), points.end(), [](const SweepPoint& a, const SweepPoint& b) {
        return std::pair(a.S, a.P) < std::pair(b.S, b.P);
      });
  const auto& ref_mean = ref->run.obs_mean;
  for (auto& p : points) {
    double dev = 0.0;
    for (std::size_t k = 0; k < ref_mean.size(); ++k)
      dev = std::max(dev, std::abs(p.run.obs_mean[k] - ref_mean[k]));
    p.max_deviation = dev;
  }
  return points;
}

void write_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += fmt::format(".tmp{}", static_cast<long>(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, fmt::format("cannot write '{}'", tmp.string()));
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw Error(Errc::io, fmt::format("write to '{}' failed", tmp.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(Errc::io, fmt::format("cannot rename onto '{}': {}", path.string(),
                                      ec.message()));
  }
}

std::string metadata_header(std::string_view command, const RunConfig& c) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::string s;
  s += fmt::format("# qpce {}\n", QPCE_VERSION);
  s += fmt::format("# created: {:%Y-%m-%dT%H:%M:%SZ}\n", fmt::gmtime(now));
  s += fmt::format("# command: {}\n", command);
  s += fmt::format("# seed: {}\n", c.mc.seed);
  s += "# frame: lab; observables are tr(obs rho) of the lab-frame density matrix\n";
  s += "# config:\n";
  const std::string cfg = emit_config(c);
  std::size_t start = 0;
  while (start < cfg.size()) {
    const auto end = cfg.find('\n', start);
    const auto line = cfg.substr(start, end - start);
    s += line.empty() ? "#\n" : "#   " + line + "\n";
    start = end == std::string::npos ? cfg.size() : end + 1;
  }
  return s;
}

int run_command(std::string_view sub, RunConfig c, const AppOptions& opt,
                std::ostream& log) {
  if (opt.out_prefix) c.output.prefix = *opt.out_prefix;
  if (opt.seed) c.mc.seed = *opt.seed;
  const std::string& prefix = c.output.prefix;

  if (sub == "kle") {
    const StochasticModel model = build_model(c);
    const KleRun kle = run_kle(c, model, c.kle.S);
    const auto header = metadata_header(sub, c);

    std::string modes = header + "index,lambda,gamma,selected\n";
    for (const auto& m : kle.selected.report)
      modes += fmt::format("{},{},{},{}\n", m.index, m.eigenvalue, m.rate,
                           m.selected ? 1 : 0);
    write_atomic(out_path(prefix, "_kle_modes.csv"), modes);

    const auto times = output_grid(model.horizon(), c.pce.output_points);
    std::vector<std::vector<double>> g;
    std::string body = header + "t";
    for (const auto& m : kle.candidates) {
      if (!(m.eigenvalue > 1e-12 * m.leading_eigenvalue)) break;
      g.push_back(evaluate_mode(m, model.kernel(), times));
      body += fmt::format(",g{}", m.index);
    }
    body += "\n";
    for (std::size_t i = 0; i < times.size(); ++i) {
      body += fmt::format("{}", times[i]);
      for (const auto& col : g) body += fmt::format(",{}", col[i]);
      body += "\n";
    }
    write_atomic(out_path(prefix, "_kle_eigenfunctions.csv"), body);

    const auto& cand = kle.candidates;
    log << fmt::format("kle: {} candidate modes, selected", cand.size());
    for (const auto& m : kle.selected.modes) log << ' ' << m.index;
    if (cand.size() >= 2 && cand[1].eigenvalue > 0.0)
      log << fmt::format(", lambda1/lambda2 = {:.4g}", cand[0].eigenvalue / cand[1].eigenvalue);
    log << '\n';
    return 0;
  }

  if (sub == "pce") {
    const PceRun r = run_pce(c, c.pce.P, c.kle.S);
    write_atomic(out_path(prefix, "_pce.csv"), metadata_header(sub, c) + pce_body(r));
    log << fmt::format("pce: N = {}, {} output times, {:.3f} s\n", r.equations,
                       r.times.size(), r.seconds);
    return 0;
  }

  if (sub == "mc") {
    const McRun r = run_mc(c);
    const auto& e = r.ensemble;
    std::string body = metadata_header(sub, c) + "t,obs_mean,obs_stderr,n_traj\n";
    for (std::size_t i = 0; i < e.times.size(); ++i)
      body += fmt::format("{},{},{},{}\n", e.times[i], e.obs_mean[i],
                          e.obs_stderr[i], e.n_used);
    write_atomic(out_path(prefix, "_mc.csv"), body);
    const double worst = e.obs_stderr.empty()
                             ? 0.0
                             : *std::max_element(e.obs_stderr.begin(), e.obs_stderr.end());
    log << fmt::format("mc: {} trajectories, max stderr {:.3g}, {}, {:.3f} s\n",
                       e.n_used, worst, e.converged ? "converged" : "NOT converged",
                       r.seconds);
    if (!e.converged && !opt.allow_unconverged) return 3;
    return 0;
  }

  if (sub == "compare") {
    const CompareRun r = run_compare(c);
    const auto& e = r.mc.ensemble;
    const auto& s = r.summary;
    std::string body = metadata_header(sub, c) +
                       "t,pce_mean,mc_mean,mc_stderr,abs_diff,within_band\n";
    for (std::size_t i = 0; i < e.times.size(); ++i) {
      const double diff = std::abs(r.pce.obs_mean[i] - e.obs_mean[i]);
      body += fmt::format("{},{},{},{},{},{}\n", e.times[i], r.pce.obs_mean[i],
                          e.obs_mean[i], e.obs_stderr[i], diff,
                          diff <= e.obs_stderr[i] ? 1 : 0);
    }
    write_atomic(out_path(prefix, "_compare.csv"), body);

    const std::string line = fmt::format(
        "compare: N = {}, trajectories = {}, mc {}, within band {}/{} ({:.1f}%), "
        "max |diff|/stderr = {:.3g}, max |diff| = {:.3g}, pce {:.3f} s, mc {:.3f} s, "
        "mc/pce time ratio = {:.3g}",
        s.equations, s.trajectories, s.converged ? "converged" : "NOT converged",
        s.within_band, s.points, 100.0 * static_cast<double>(s.within_band) / static_cast<double>(s.points),
        s.max_ratio, s.max_abs_diff, s.pce_seconds, s.mc_seconds,
        s.mc_seconds / s.pce_seconds);
    write_atomic(out_path(prefix, "_compare_summary.txt"),
                 metadata_header(sub, c) + line + "\n");
    log << line << '\n';
    if (!s.converged && !opt.allow_unconverged) return 3;
    return 0;
  }

  if (sub == "sweep") {
    const auto points = run_sweep(c);
    const auto header = metadata_header(sub, c);
    std::string summary = header + "P,S,N,max_deviation,file\n";
    for (const auto& p : points) {
      const auto file = out_path(prefix, fmt::format("_sweep_P{}_S{}.csv", p.P, p.S));
      RunConfig point = c;
      point.pce.P = p.P;
      point.kle.S = p.S;
      write_atomic(file, metadata_header(sub, point) + pce_body(p.run));
      summary += fmt::format("{},{},{},{},{}\n", p.P, p.S, p.run.equations,
                             p.max_deviation, file.filename().string());
      log << fmt::format("sweep: P = {}, S = {}, N = {}, max deviation {:.3g}\n",
                         p.P, p.S, p.run.equations, p.max_deviation);
    }
    write_atomic(out_path(prefix, "_sweep_summary.csv"), summary);
    return 0;
  }

  throw Error(Errc::invalid_argument, fmt::format("unknown subcommand '{}'", sub));
}

}  // namespace qpce

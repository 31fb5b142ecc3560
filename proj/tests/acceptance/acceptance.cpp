// Acceptance runner. One PASS/FAIL line per criterion; with arguments,
// only the listed criteria run. Exit status is nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <fmt/core.h>
#include <omp.h>

#include "oracles.hpp"
#include "qpce/app.hpp"
#include "qpce/config.hpp"
#include "qpce/kle.hpp"
#include "qpce/monte_carlo.hpp"
#include "qpce/multi_index.hpp"
#include "qpce/pce.hpp"

using namespace qpce;

namespace {

const std::filesystem::path presets{QPCE_PRESET_DIR};

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::size_t binomial(std::size_t n, std::size_t k) {
  std::size_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = a + (b - a) * double(i) / double(n - 1);
  return t;
}

Outcome hierarchy_size_identity() {
  Outcome o;
  const auto fig = enumerate_indices(3, 9);
  o.pass = fig.size() == 220;
  std::size_t checked = 0;
  for (std::size_t S = 1; S <= 6; ++S)
    for (unsigned P = 0; P <= 10; ++P) {
      const auto set = enumerate_indices(S, P);
      if (set.size() != binomial(S + P, P) || hierarchy_size(S, P) != set.size()) o.pass = false;
      // Every tuple in [0, P]^S is a member exactly when |m| <= P.
      std::vector<unsigned> m(S, 0);
      for (;;) {
        unsigned total = 0;
        for (unsigned v : m) total += v;
        const auto pos = set.position(m);
        if (pos.has_value() != (total <= P)) o.pass = false;
        if (pos && !std::equal(m.begin(), m.end(), set[*pos].begin())) o.pass = false;
        ++checked;
        std::size_t j = 0;
        while (j < S && ++m[j] > P) m[j++] = 0;
        if (j == S) break;
      }
    }
  o.detail = fmt::format("N(3,9) = {}, {} tuples checked", fig.size(), checked);
  return o;
}

Outcome galerkin_tensor() {
  const auto rule = oracle::gauss_hermite(12);
  double worst = 0.0;
  std::size_t triples = 0;
  for (std::size_t S = 1; S <= 3; ++S)
    for (unsigned P = 0; P <= 5; ++P) {
      const auto s = enumerate_indices(S, P);
      const auto c = build_couplings(s);
      for (std::size_t m = 0; m < s.size(); ++m)
        for (std::size_t n = 0; n < S; ++n)
          for (std::size_t l = 0; l < s.size(); ++l) {
            double listed = 0.0;
            for (const auto& e : c.row(m))
              if (e.mode == n && e.l == l) listed = e.weight;
            double num = 1.0, den = 1.0;
            for (std::size_t j = 0; j < S; ++j) {
              double a = 0.0, b = 0.0;
              for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
                const double x = rule.nodes[q];
                const double hm = oracle::hermite_he(s[m][j], x);
                a += rule.weights[q] * hm * (j == n ? x : 1.0) * oracle::hermite_he(s[l][j], x);
                b += rule.weights[q] * hm * hm;
              }
              num *= a;
              den *= b;
            }
            worst = std::max(worst, std::abs(listed - num / den));
            ++triples;
          }
    }
  return {worst < 1e-10, fmt::format("{} triples, max |diff| = {:.3g}", triples, worst)};
}

Outcome kle_oracle() {
  double worst = 0.0, trace = 0.0;
  for (double tau_c : {0.1, 10.0}) {
    const auto kernel = CorrelationKernel::ornstein_uhlenbeck(1.0, tau_c);
    const auto modes = solve_fredholm(kernel, 1.0, 400, 400);
    const auto exact = oracle::ou_eigenvalues(1.0, tau_c, 1.0, 8);
    for (std::size_t k = 0; k < 8; ++k)
      worst = std::max(worst, std::abs(modes[k].eigenvalue - exact[k]) / exact[k]);
    double sum = 0.0;
    for (const auto& m : modes) sum += m.eigenvalue;
    trace = std::max(trace, std::abs(sum - 1.0));  // int_0^1 C(t, t) dt = alpha^2
  }
  return {worst < 1e-4 && trace < 1e-8,
          fmt::format("top-8 rel err = {:.3g}, trace rel err = {:.3g}", worst, trace)};
}

Outcome pure_dephasing() {
  const auto c = load_config(presets / "dephasing_oracle.ini");
  const auto pce = run_pce(c, 6, 3);
  const auto mc = run_mc(c);
  const double alpha = c.noise.alpha, tau_c = c.noise.tau_c;
  double pce_err = 0.0, mc_ratio = 0.0;
  bool mc_ok = mc.ensemble.converged;
  for (std::size_t i = 0; i < pce.times.size(); ++i) {
    const double exact = oracle::dephasing_coherence(alpha, tau_c, pce.times[i]);
    pce_err = std::max(pce_err, std::abs(pce.obs_mean[i] - exact));
    const double d = std::abs(mc.ensemble.obs_mean[i] - exact);
    const double se = mc.ensemble.obs_stderr[i];
    if (d > 3.0 * se + 1e-12) mc_ok = false;
    if (se > 0.0) mc_ratio = std::max(mc_ratio, d / se);
  }
  return {pce_err < 2e-3 && mc_ok,
          fmt::format("PCE max err = {:.3g}, MC max |diff|/stderr = {:.3g} ({} trajectories)",
                      pce_err, mc_ratio, mc.ensemble.n_used)};
}

Outcome fig2_compare() {
  const auto c = load_config(presets / "fig2.ini");
  const auto r = run_compare(c);
  const auto& s = r.summary;
  const bool band = double(s.within_band) >= 0.95 * double(s.points);
  const bool faster = s.pce_seconds < s.mc_seconds;
  return {band && s.converged && faster && s.points == 200,
          fmt::format("N = {}, in band {}/{}, MC converged = {} ({} trajectories), "
                      "max |diff|/stderr = {:.3g}, PCE {:.2f} s, MC {:.2f} s, speedup {:.1f}x",
                      s.equations, s.within_band, s.points, s.converged, s.trajectories,
                      s.max_ratio, s.pce_seconds, s.mc_seconds, s.mc_seconds / s.pce_seconds)};
}

Outcome mode_dominance() {
  auto ratio = [](double tau_c) {
    const auto modes = solve_fredholm(CorrelationKernel::ornstein_uhlenbeck(1.0, tau_c), 1.0, 400, 2);
    return modes[0].eigenvalue / modes[1].eigenvalue;
  };
  const double slow = ratio(10.0), fast = ratio(0.1);
  return {slow > 10.0 && fast < 3.0,
          fmt::format("lambda1/lambda2 = {:.4g} (tau_c = 10), {:.4g} (tau_c = 0.1)", slow, fast)};
}

Outcome order_convergence() {
  const auto c = load_config(presets / "fig2.ini");
  const auto ref = run_pce(c, 9, 3);
  std::vector<double> dev;
  for (unsigned P : {1u, 3u, 5u, 7u}) {
    const auto r = run_pce(c, P, 3);
    double d = 0.0;
    for (std::size_t i = 0; i < r.obs_mean.size(); ++i)
      d = std::max(d, std::abs(r.obs_mean[i] - ref.obs_mean[i]));
    dev.push_back(d);
  }
  bool pass = true;
  for (std::size_t k = 1; k < dev.size(); ++k) pass = pass && dev[k] <= 1.1 * dev[k - 1];
  return {pass, fmt::format("max deviation from P = 9: {:.3g}, {:.3g}, {:.3g}, {:.3g} (P = 1, 3, 5, 7)",
                            dev[0], dev[1], dev[2], dev[3])};
}

Outcome invariants() {
  Outcome o;
  const StochasticModel fig2(pauli::x(), pauli::z(), CorrelationKernel::ornstein_uhlenbeck(3.0, 10.0), 1.0);
  const auto rho0 = DensityMatrix::pure(pauli_eigenstate("x+"));

  // Trace and Hermiticity on the P = 9, S = 3 hierarchy.
  const auto cand = solve_fredholm(fig2.kernel(), 1.0, 400, default_candidate_modes(3));
  const auto kle = select_modes(cand, transition_rates(cand, fig2.h0(), fig2.v(), 1.0), 3);
  const auto basis9 = std::make_shared<const MultiIndexSet>(enumerate_indices(3, 9));
  const auto couplings9 = build_couplings(*basis9);
  const auto init9 = initial_pce_state(rho0, basis9);
  PropagationOptions opts;
  opts.parallel = true;
  double trace = 0.0, herm = 0.0;
  for (const auto& st : propagate(init9, fig2, kle, couplings9, linspace(0.0, 1.0, 201), opts)) {
    const auto d = diagnose(st, init9);
    trace = std::max(trace, d.trace_error);
    herm = std::max(herm, d.hermiticity_error);
  }
  o.pass = trace <= 1e-8 && herm <= 1e-8;

  // RK4 self-convergence at P = 5.
  const auto basis5 = std::make_shared<const MultiIndexSet>(enumerate_indices(3, 5));
  const auto couplings5 = build_couplings(*basis5);
  const auto init5 = initial_pce_state(rho0, basis5);
  const std::vector<double> ends{0.0, 1.0};
  auto final_state = [&](double dt) {
    PropagationOptions p;
    p.dt_max = dt;
    return propagate(init5, fig2, kle, couplings5, ends, p).back();
  };
  const auto coarse = final_state(1.0 / 40), half = final_state(1.0 / 80), fine = final_state(1.0 / 160);
  double e1 = 0.0, e2 = 0.0;
  for (std::size_t q = 0; q < coarse.data().size(); ++q) {
    e1 = std::max(e1, std::abs(coarse.data()[q] - fine.data()[q]));
    e2 = std::max(e2, std::abs(half.data()[q] - fine.data()[q]));
  }
  const double factor = e1 / e2;
  o.pass = o.pass && factor >= 10.0 && factor <= 24.0;

  // MC determinism across worker counts.
  const auto t_out = linspace(0.0, 1.0, 21);
  MCConfig cfg;
  cfg.n_traj = 1000;
  cfg.batch = 125;
  cfg.stderr_target = 1e-9;
  cfg.parallel = false;
  const auto serial = mc_average(fig2, rho0, pauli::x(), cfg, t_out);
  cfg.parallel = true;
  const int max_threads = omp_get_max_threads();
  bool same = true;
  for (int threads : {1, 2, 3, 4, 7}) {
    omp_set_num_threads(threads);
    const auto par = mc_average(fig2, rho0, pauli::x(), cfg, t_out);
    same = same && par.obs_mean == serial.obs_mean && par.obs_stderr == serial.obs_stderr;
    for (std::size_t i = 0; i < t_out.size(); ++i)
      same = same && par.mean_rho[i].op() == serial.mean_rho[i].op();
  }
  omp_set_num_threads(max_threads);
  o.pass = o.pass && same;

  // stderr scaling.
  double ratio = 0.0;
  for (std::uint64_t seed : {101u, 102u, 103u}) {
    MCConfig c;
    c.seed = seed;
    c.stderr_target = 1e-12;
    c.batch = 200;
    c.n_traj = 400;
    const auto small = mc_average(fig2, rho0, pauli::x(), c, t_out);
    c.n_traj = 1600;
    const auto large = mc_average(fig2, rho0, pauli::x(), c, t_out);
    double r = 0.0;
    for (std::size_t i = 1; i < t_out.size(); ++i) r += large.obs_stderr[i] / small.obs_stderr[i];
    ratio += r / double(t_out.size() - 1) / 3.0;
  }
  o.pass = o.pass && ratio >= 0.4 && ratio <= 0.6;

  o.detail = fmt::format("trace err = {:.3g}, herm err = {:.3g}, RK4 factor = {:.3g}, "
                         "MC bit-identical over threads = {}, stderr ratio = {:.3g}",
                         trace, herm, factor, same, ratio);
  return o;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "hierarchy size identity", hierarchy_size_identity},
      {2, "Galerkin tensor vs Gauss-Hermite quadrature", galerkin_tensor},
      {3, "KLE vs analytic OU eigenvalues", kle_oracle},
      {4, "pure dephasing closed form", pure_dephasing},
      {5, "fig2 compare: PCE inside MC stderr band", fig2_compare},
      {6, "mode dominance", mode_dominance},
      {7, "order convergence on fig2", order_convergence},
      {8, "invariant suite", invariants},
  };
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    fmt::print("{} [{}] {}: {} ({:.1f} s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail, secs);
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}

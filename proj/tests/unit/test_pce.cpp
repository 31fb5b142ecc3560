#include <doctest.h>

#include <cmath>
#include <random>

#include <omp.h>

#include "oracles.hpp"
#include "qpce/errors.hpp"
#include "qpce/kernels.hpp"
#include "qpce/monte_carlo.hpp"
#include "qpce/pce.hpp"

using namespace qpce;

namespace {

TruncatedKLE make_kle(const StochasticModel& model, std::size_t S,
                      std::size_t grid = 400) {
  const auto modes = solve_fredholm(model.kernel(), model.horizon(), grid,
                                    std::max<std::size_t>(default_candidate_modes(S), S));
  const auto rates = transition_rates(modes, model.h0(), model.v(), model.horizon());
  return select_modes(modes, rates, S);
}

struct Setup {
  StochasticModel model;
  TruncatedKLE kle;
  std::shared_ptr<const MultiIndexSet> basis;
  GalerkinCouplings couplings;
  PCEState initial;

  Setup(StochasticModel m, std::size_t S, unsigned P,
        const std::string& state = "x+")
      : model(std::move(m)),
        kle(make_kle(model, S)),
        basis(std::make_shared<const MultiIndexSet>(enumerate_indices(S, P))),
        couplings(build_couplings(*basis)),
        initial(initial_pce_state(DensityMatrix::pure(pauli_eigenstate(state)), basis)) {}

  std::vector<PCEState> run(std::span<const double> times, double dt_max = 0.0,
                            bool parallel = false) const {
    PropagationOptions opts;
    opts.dt_max = dt_max;
    opts.parallel = parallel;
    return propagate(initial, model, kle, couplings, times, opts);
  }
};

StochasticModel fig2_model() {
  return {pauli::x(), pauli::z(), CorrelationKernel::ornstein_uhlenbeck(3.0, 10.0), 1.0};
}

StochasticModel dephasing_model(double alpha = 0.25) {
  return {Operator::Zero(2, 2), pauli::z(), CorrelationKernel::ornstein_uhlenbeck(alpha, 10.0), 1.0};
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = a + (b - a) * double(i) / double(n - 1);
  return t;
}

}  // namespace

TEST_CASE("initial state and mean round trip") {
  const Setup s(dephasing_model(), 3, 4);
  CHECK(s.initial.size() == 35);
  CHECK(s.initial.data().size() == 35 * 4);
  const Operator expect = 0.5 * (pauli::identity() + pauli::x());
  CHECK((s.initial.coefficient(0) - expect).norm() < 1e-15);
  for (std::size_t m = 1; m < s.initial.size(); ++m)
    CHECK(s.initial.coefficient(m).norm() == 0.0);
  CHECK((mean_state(s.initial, s.model).op() - expect).norm() < 1e-15);
  CHECK(observable_variance(s.initial, pauli::x(), s.model) == 0.0);
}

TEST_CASE("hierarchy right-hand side edge cases") {
  const Setup s(fig2_model(), 3, 3);
  PCEState zero(s.basis, 2);
  for (const auto& d : hierarchy_rhs(zero, 0.4, s.kle, s.model, s.couplings))
    CHECK(d.norm() == 0.0);

  const Setup p0(fig2_model(), 3, 0);
  const auto d0 = hierarchy_rhs(p0.initial, 0.4, p0.kle, p0.model, p0.couplings);
  REQUIRE(d0.size() == 1);
  CHECK(d0[0].norm() == 0.0);

  const auto times = linspace(0.0, 1.0, 11);
  const auto traj = p0.run(times);
  for (const auto& st : traj)
    CHECK((st.coefficient(0) - p0.initial.coefficient(0)).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("two-operator system with a constant mode") {
  const double c = 1.7;
  const StochasticModel model(Operator::Zero(2, 2), pauli::z(),
                              CorrelationKernel::constant(c, 1.0), 1.0);
  const Setup s(model, 1, 1);
  REQUIRE(s.kle.modes[0].eigenvalue == doctest::Approx(c).epsilon(1e-10));
  const auto times = linspace(0.0, 1.0, 21);
  const auto traj = s.run(times);
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double got = expectation(pauli::x(), mean_state(traj[i], model));
    CHECK(std::abs(got - std::cos(2.0 * std::sqrt(c) * times[i])) < 1e-6);
  }
}

TEST_CASE("noiseless model keeps full coherence") {
  const StochasticModel model(pauli::x(), pauli::z(),
                              CorrelationKernel::ornstein_uhlenbeck(0.0, 10.0), 1.0);
  const Setup s(model, 3, 4);
  const auto times = linspace(0.0, 1.0, 9);
  for (const auto& st : s.run(times)) {
    CHECK(expectation(pauli::x(), mean_state(st, model)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(observable_variance(st, pauli::x(), model) == doctest::Approx(0.0));
  }
}

TEST_CASE("pure dephasing matches the closed form") {
  const Setup s(dephasing_model(), 3, 6);
  const auto times = linspace(0.0, 1.0, 101);
  const auto traj = s.run(times);
  double worst = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double exact = oracle::dephasing_coherence(0.25, 10.0, times[i]);
    worst = std::max(worst, std::abs(expectation(pauli::x(), mean_state(traj[i], s.model)) - exact));
  }
  CHECK(worst < 2e-3);
  CHECK(oracle::dephasing_coherence(0.25, 10.0, 1.0) ==
        doctest::Approx(oracle::dephasing_coherence_quadrature(0.25, 10.0, 1.0)).epsilon(1e-6));
}

TEST_CASE("dephasing error does not grow with order") {
  const auto times = linspace(0.0, 1.0, 51);
  double prev = std::numeric_limits<double>::infinity();
  for (unsigned P : {2u, 4u, 6u, 8u}) {
    const Setup s(dephasing_model(), 3, P);
    const auto traj = s.run(times);
    double worst = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i)
      worst = std::max(worst, std::abs(expectation(pauli::x(), mean_state(traj[i], s.model)) -
                                       oracle::dephasing_coherence(0.25, 10.0, times[i])));
    CHECK(worst <= prev * 1.1);
    prev = worst;
  }
}

TEST_CASE("trace and Hermiticity are conserved") {
  const Setup s(fig2_model(), 3, 9);
  const auto times = linspace(0.0, 1.0, 41);
  for (const auto& st : s.run(times)) {
    const auto diag = diagnose(st, s.initial);
    CHECK(diag.trace_error <= 1e-8);
    CHECK(diag.hermiticity_error <= 1e-8);
    CHECK(std::abs(st.coefficient(0).trace() - 1.0) <= 1e-8);
  }
}

TEST_CASE("RK4 order factor") {
  const Setup s(fig2_model(), 3, 5);
  const std::vector<double> times{0.0, 1.0};
  auto final_state = [&](double dt) { return s.run(times, dt).back(); };
  auto distance = [](const PCEState& a, const PCEState& b) {
    double d = 0.0;
    for (std::size_t q = 0; q < a.data().size(); ++q)
      d = std::max(d, std::abs(a.data()[q] - b.data()[q]));
    return d;
  };
  const double dt = 1.0 / 40.0;
  const auto coarse = final_state(dt);
  const auto half = final_state(dt / 2);
  const auto ref = final_state(dt / 4);
  const double factor = distance(coarse, ref) / distance(half, ref);
  MESSAGE("RK4 order factor: " << factor);
  CHECK(factor >= 10.0);
  CHECK(factor <= 24.0);
}

TEST_CASE("serial and OpenMP hierarchy kernels agree bitwise") {
  const auto basis = enumerate_indices(3, 7);
  const auto couplings = build_couplings(basis);
  std::mt19937_64 gen(7);
  std::normal_distribution<double> normal;
  std::vector<Complex> in(basis.size() * 4);
  for (auto& z : in) z = {normal(gen), normal(gen)};
  const std::vector<double> amps{0.3, -1.2, 0.05};
  const Operator vt = 0.6 * pauli::z() + 0.8 * pauli::y();

  std::vector<Complex> serial(in.size()), parallel(in.size());
  kernels::hierarchy_apply_serial(couplings, amps, vt, in, serial);
  for (int threads : {1, 2, 3, 4}) {
    omp_set_num_threads(threads);
    kernels::hierarchy_apply_omp(couplings, amps, vt, in, parallel);
    CHECK(serial == parallel);
  }

  const Setup s(fig2_model(), 3, 5);
  const auto times = linspace(0.0, 1.0, 5);
  const auto a = s.run(times, 0.0, false).back();
  const auto b = s.run(times, 0.0, true).back();
  CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

TEST_CASE("incompatible inputs are rejected") {
  const Setup s(fig2_model(), 3, 3);
  const auto other = std::make_shared<const MultiIndexSet>(enumerate_indices(2, 3));
  const PCEState wrong = initial_pce_state(DensityMatrix::pure(pauli_eigenstate("x+")), other);
  CHECK_THROWS_AS((void)hierarchy_rhs(wrong, 0.0, s.kle, s.model, s.couplings), Error);
  const std::vector<double> bad{0.1, 0.2};
  CHECK_THROWS_AS((void)s.run(bad), Error);
  const std::vector<double> descending{0.0, 0.5, 0.4};
  CHECK_THROWS_AS((void)s.run(descending), Error);
}

TEST_CASE("runaway steps trip the divergence guard") {
  // For a qubit the commutator keeps trace and Hermiticity bit-exact, so
  // only overflow to inf/nan can trip the guard. Steps far outside the RK4
  // stability region get there in a few dozen steps.
  const Setup s(StochasticModel(pauli::x(), pauli::z(),
                                CorrelationKernel::ornstein_uhlenbeck(1e6, 10.0), 1.0),
                3, 9);
  const auto times = linspace(0.0, 1.0, 41);
  try {
    (void)s.run(times, 0.025);
    FAIL("expected propagation-diverged");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::propagation_diverged);
    CHECK(e.exit_code() == 2);
  }
  // The same model at a resolved step only checks invariants, it never trips.
  const Setup ok(fig2_model(), 3, 9);
  CHECK_NOTHROW((void)ok.run(times, 1e-3));
}

TEST_CASE("observable variance matches Monte Carlo sample variance") {
  const Setup s(dephasing_model(), 3, 6);
  const std::vector<double> times{0.0, 1.0};
  const auto final_state = s.run(times).back();
  const double pce_var = observable_variance(final_state, pauli::x(), s.model);

  MCConfig cfg;
  cfg.seed = 99;
  const TrajectoryPlan plan(s.model, DensityMatrix::pure(pauli_eigenstate("x+")), pauli::x(),
                            times, cfg);
  const std::size_t n = 10000;
  std::vector<TrajectoryPlan::Result> results(n);
  run_batch_serial(plan, 0, results);
  double mean = 0.0;
  for (const auto& r : results) mean += r.obs[1];
  mean /= n;
  double m2 = 0.0, m4 = 0.0;
  for (const auto& r : results) {
    const double d = r.obs[1] - mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m2 /= n - 1;
  m4 /= n;
  const double se = std::sqrt((m4 - m2 * m2) / n);
  CHECK(std::abs(pce_var - m2) <= 3.0 * se);
}

#include <benchmark/benchmark.h>

#include <random>

#include <omp.h>

#include "qpce/app.hpp"
#include "qpce/config.hpp"
#include "qpce/kernels.hpp"
#include "qpce/monte_carlo.hpp"
#include "qpce/multi_index.hpp"

using namespace qpce;

namespace {

struct Hierarchy {
  GalerkinCouplings couplings;
  std::vector<Complex> in, out;
  std::vector<double> amps{0.3, -1.2, 0.05};
  Operator vt = 0.6 * pauli::z() + 0.8 * pauli::y();

  explicit Hierarchy(unsigned P) : couplings(build_couplings(enumerate_indices(3, P))) {
    std::mt19937_64 gen(1);
    std::normal_distribution<double> normal;
    in.resize(couplings.size() * 4);
    out.resize(in.size());
    for (auto& z : in) z = {normal(gen), normal(gen)};
  }
};

void BM_hierarchy_serial(benchmark::State& state) {
  Hierarchy h(static_cast<unsigned>(state.range(0)));
  for (auto _ : state) {
    kernels::hierarchy_apply_serial(h.couplings, h.amps, h.vt, h.in, h.out);
    benchmark::DoNotOptimize(h.out.data());
  }
  state.counters["N"] = double(h.couplings.size());
}

void BM_hierarchy_omp(benchmark::State& state) {
  Hierarchy h(static_cast<unsigned>(state.range(0)));
  for (auto _ : state) {
    kernels::hierarchy_apply_omp(h.couplings, h.amps, h.vt, h.in, h.out);
    benchmark::DoNotOptimize(h.out.data());
  }
  state.counters["N"] = double(h.couplings.size());
}

struct Batch {
  StochasticModel model{pauli::x(), pauli::z(), CorrelationKernel::ornstein_uhlenbeck(3.0, 10.0), 1.0};
  std::vector<double> t_out;
  TrajectoryPlan plan;
  std::vector<TrajectoryPlan::Result> results;

  Batch()
      : t_out(output_grid(1.0, 200)),
        plan(model, DensityMatrix::pure(pauli_eigenstate("x+")), pauli::x(), t_out, MCConfig{}),
        results(256) {}
};

void BM_mc_batch_serial(benchmark::State& state) {
  Batch b;
  for (auto _ : state) run_batch_serial(b.plan, 0, b.results);
  state.SetItemsProcessed(state.iterations() * std::int64_t(b.results.size()));
}

void BM_mc_batch_omp(benchmark::State& state) {
  Batch b;
  for (auto _ : state) run_batch_omp(b.plan, 0, b.results);
  state.SetItemsProcessed(state.iterations() * std::int64_t(b.results.size()));
}

// Full fig2 pipelines: PCE at P = 9, S = 3 against MC run to its stop rule.
RunConfig fig2() {
  return load_config(std::filesystem::path(QPCE_PRESET_DIR) / "fig2.ini");
}

void BM_fig2_pce(benchmark::State& state) {
  const auto c = fig2();
  for (auto _ : state) benchmark::DoNotOptimize(run_pce(c, 9, 3));
}

void BM_fig2_mc(benchmark::State& state) {
  const auto c = fig2();
  for (auto _ : state) benchmark::DoNotOptimize(run_mc(c));
}

}  // namespace

BENCHMARK(BM_hierarchy_serial)->Arg(5)->Arg(9)->Arg(12);
BENCHMARK(BM_hierarchy_omp)->Arg(5)->Arg(9)->Arg(12);
BENCHMARK(BM_mc_batch_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_mc_batch_omp)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_fig2_pce)->Unit(benchmark::kMillisecond)->Iterations(1);
BENCHMARK(BM_fig2_mc)->Unit(benchmark::kMillisecond)->Iterations(1);

BENCHMARK_MAIN();

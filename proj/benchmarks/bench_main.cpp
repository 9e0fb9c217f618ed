// Microbenchmarks for the hot paths: forward simulation, the metric dynamic
// programs, and one backward regression sweep.

#include "ppide/bsde.hpp"
#include "ppide/simulate.hpp"
#include "ppide/skorohod.hpp"

#include <benchmark/benchmark.h>

using namespace ppide;

namespace {

Eigen::VectorXd vec1(double x) { return Eigen::VectorXd::Constant(1, x); }

Characteristics levyFixture() {
    JumpMeasure jumps;
    jumps.atoms.push_back({vec1(0.4), 0.7});
    jumps.atoms.push_back({vec1(-0.3), 0.5});
    return Characteristics::constant(1.0, vec1(0.1),
                                     Eigen::MatrixXd::Constant(1, 1, 0.2), jumps,
                                     1.0, 0.3);
}

void BM_Simulate(benchmark::State& state) {
    const Characteristics chi = levyFixture();
    const int n = static_cast<int>(state.range(0));
    std::uint64_t seed = 1;
    for (auto _ : state) {
        const Ensemble ens =
            simulate(chi, 0.0, CadlagPath::zero(1.0, 1), n, 1.0 / 256.0, seed++);
        benchmark::DoNotOptimize(ens.paths.back());
    }
    state.SetItemsProcessed(state.iterations() * n * 256);
}
BENCHMARK(BM_Simulate)->Arg(256)->Arg(1024);

void BM_MetricJ1(benchmark::State& state) {
    const CadlagPath a = CadlagPath::step(1.0, {0.0, 0.31, 0.62}, {0.0, 0.8, -0.4});
    const CadlagPath b = CadlagPath::step(1.0, {0.0, 0.33, 0.7}, {0.1, 0.75, -0.3});
    const double mesh = 1.0 / state.range(0);
    for (auto _ : state) benchmark::DoNotOptimize(d_j1(a, b, mesh));
}
BENCHMARK(BM_MetricJ1)->Arg(256)->Arg(1024);

void BM_MetricM1(benchmark::State& state) {
    const CadlagPath a = CadlagPath::step(1.0, {0.0, 0.31, 0.62}, {0.0, 0.8, -0.4});
    const CadlagPath b = CadlagPath::step(1.0, {0.0, 0.33, 0.7}, {0.1, 0.75, -0.3});
    const int n = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(d_m1(a, b, n));
}
BENCHMARK(BM_MetricM1)->Arg(16)->Arg(64);

void BM_BackwardSolve(benchmark::State& state) {
    const Characteristics chi = levyFixture();
    const int n = static_cast<int>(state.range(0));
    const Ensemble ens = simulate(chi, 0.0, CadlagPath::zero(1.0, 1), n, 1.0 / 64.0, 7);
    Driver drv;
    drv.f = [](double, const CadlagPath&, double y, const Eigen::VectorXd&, double) {
        return 0.5 * y;
    };
    drv.eta = [](double, const CadlagPath&, const Eigen::VectorXd& z) {
        return std::min(1.0, z.norm());
    };
    const auto xi = [](const CadlagPath& w) { return w.valueScalar(1.0); };
    for (auto _ : state) {
        const BsdeSolution sol = solve_bsde(ens, chi, xi, drv);
        benchmark::DoNotOptimize(sol.rootValue);
    }
    state.SetItemsProcessed(state.iterations() * n * 64);
}
BENCHMARK(BM_BackwardSolve)->Arg(1024)->Arg(4096);

} // namespace

BENCHMARK_MAIN();

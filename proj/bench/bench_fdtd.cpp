#include <cstring>

#include <benchmark/benchmark.h>
#include <omp.h>

#include "cbr/fdtd/simulation.hpp"

using namespace cbr::fdtd;

namespace {

// Resonator scene with a pulse already launched, so the source, Drude and
// CPML branches are all exercised.
Solver make_solver(double resolution) {
    SimulationConfig cfg;
    cfg.resolution = resolution;
    const CbrGeometry g;
    const Scene scene = make_scene(g, Scene::Kind::cbr, cfg.layout);
    Solver s(scene, cfg.dx_nm(std::max(g.n_membrane, g.n_oxide)), cfg.courant, Boundaries{}, cfg.pml);
    s.add_point_source(0, s.j_of(scene.emitter_y_nm), Pulse::from_band(780.0, 160.0));
    for (int n = 0; n < 200; ++n) s.step_serial();
    return s;
}

bool same_fields(Solver& a, Solver& b) {
    auto eq = [](const std::vector<double>& x, const std::vector<double>& y) {
        return x.size() == y.size() && std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0;
    };
    return eq(a.ez(), b.ez()) && eq(a.hx(), b.hx()) && eq(a.hy(), b.hy());
}

void BM_StepSerial(benchmark::State& state) {
    Solver s = make_solver(static_cast<double>(state.range(0)));
    for (auto _ : state) s.step_serial();
    state.counters["cells"] = s.nx() * s.ny();
    state.counters["cell_updates/s"] =
        benchmark::Counter(static_cast<double>(s.nx()) * s.ny(), benchmark::Counter::kIsIterationInvariantRate);
}

void BM_StepParallel(benchmark::State& state) {
    Solver s = make_solver(static_cast<double>(state.range(0)));
    const int threads = static_cast<int>(state.range(1));
    s.set_threads(threads);
    omp_set_num_threads(threads);
    {
        Solver ref = make_solver(static_cast<double>(state.range(0)));
        Solver par = make_solver(static_cast<double>(state.range(0)));
        for (int n = 0; n < 20; ++n) {
            ref.step_serial();
            par.step_parallel();
        }
        if (!same_fields(ref, par)) {
            state.SkipWithError("parallel kernel differs from the serial reference");
            return;
        }
    }
    for (auto _ : state) s.step_parallel();
    state.counters["cells"] = s.nx() * s.ny();
    state.counters["threads"] = threads;
    state.counters["cell_updates/s"] =
        benchmark::Counter(static_cast<double>(s.nx()) * s.ny(), benchmark::Counter::kIsIterationInvariantRate);
}

void thread_args(benchmark::internal::Benchmark* b) {
    const int max_threads = omp_get_max_threads();
    for (int res : {20, 30}) {
        for (int t = 1; t <= max_threads; t *= 2) b->Args({res, t});
        if ((max_threads & (max_threads - 1)) != 0) b->Args({res, max_threads});
    }
}

}  // namespace

BENCHMARK(BM_StepSerial)->Arg(20)->Arg(30)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_StepParallel)->Apply(thread_args)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();

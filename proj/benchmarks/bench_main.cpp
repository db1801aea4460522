#include <benchmark/benchmark.h>

#include <random>

#include "thetaexp/expansion.hpp"
#include "thetaexp/montecarlo.hpp"
#include "thetaexp/transfer.hpp"

using namespace thetaexp;

namespace {

void BM_gauss_step(benchmark::State& state) {
    const auto p = ThetaParams::make(2);
    double x = 0.123456789;
    for (auto _ : state) {
        const auto s = gauss_step_unchecked(x, p);
        x = s.next > 0.0 ? s.next : 0.123456789;
        benchmark::DoNotOptimize(s.digit);
    }
}
BENCHMARK(BM_gauss_step);

void BM_exact_expand(benchmark::State& state) {
    const auto p = ThetaParams::make(2);
    const QuadNumber x = QuadNumber::parse("-1/7+1/3√2");
    for (auto _ : state) benchmark::DoNotOptimize(expand(x, static_cast<std::size_t>(state.range(0)), p));
}
BENCHMARK(BM_exact_expand)->Arg(10)->Arg(40);

void BM_build_ulam(benchmark::State& state) {
    const auto ctx = MeasureContext::make(2);
    for (auto _ : state) benchmark::DoNotOptimize(build_ulam(static_cast<std::size_t>(state.range(0)), ctx));
}
BENCHMARK(BM_build_ulam)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);

void BM_trajectory(benchmark::State& state) {
    const auto ctx = MeasureContext::make(2);
    TrajectoryOptions opt;
    opt.norming = NormingSequence::n_log_n();
    opt.running_per_decade = 50;
    std::mt19937_64 rng(1);
    for (auto _ : state)
        benchmark::DoNotOptimize(run_trajectory(sample_gamma(rng, ctx), static_cast<std::uint64_t>(state.range(0)), ctx, opt));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_trajectory)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_psi_curve(benchmark::State& state) {
    const auto ctx = MeasureContext::make(2);
    for (auto _ : state) benchmark::DoNotOptimize(psi_curve(12, 50, ctx));
}
BENCHMARK(BM_psi_curve)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();

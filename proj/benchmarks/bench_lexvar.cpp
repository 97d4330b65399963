#include <benchmark/benchmark.h>

#include <cstdio>
#include <vector>

#include "geolex/lexvar.hpp"
#include "geolex/stats.hpp"

namespace {

void BM_SageFit(benchmark::State& state) {
    const auto v = static_cast<std::size_t>(state.range(0));
    geolex::stats::RngStream r(4, 0);
    geolex::corpus::TokenCounts background;
    std::vector<double> counts(v);
    for (std::size_t j = 0; j < v; ++j) {
        char buf[24];
        std::snprintf(buf, sizeof buf, "t%06zu", j);
        // Zipf-like background with a perturbed group sample.
        const double base = 1e5 / static_cast<double>(j + 1);
        background[buf] = 1 + static_cast<std::int64_t>(base);
        counts[j] = static_cast<double>(static_cast<std::int64_t>(0.05 * base * (0.5 + r.uniform01())));
    }
    const auto bg = geolex::lexvar::fit_background(background);
    geolex::lexvar::SageConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(geolex::lexvar::sage_fit(counts, bg, cfg));
}
BENCHMARK(BM_SageFit)->Arg(1000)->Arg(20000)->Unit(benchmark::kMillisecond);

void BM_PairedT(benchmark::State& state) {
    geolex::stats::RngStream r(5, 0);
    std::vector<double> d(static_cast<std::size_t>(state.range(0)));
    for (auto& x : d) x = r.uniform01() - 0.5;
    for (auto _ : state) benchmark::DoNotOptimize(geolex::lexvar::paired_t(d));
}
BENCHMARK(BM_PairedT)->Arg(50);

}  // namespace

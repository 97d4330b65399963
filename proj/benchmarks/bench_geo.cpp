#include <benchmark/benchmark.h>

#include <cmath>
#include <string>
#include <vector>

#include "geolex/geo.hpp"
#include "geolex/stats.hpp"

namespace {

// grid x grid unit-square counties, each ring with `vertices` points per side.
geolex::geo::GeoIndex grid_index(int grid, int vertices) {
    std::vector<geolex::geo::County> cs;
    for (int i = 0; i < grid; ++i) {
        for (int j = 0; j < grid; ++j) {
            geolex::geo::County c;
            c.county_id = "C" + std::to_string(i * grid + j);
            c.msa_id = "M" + std::to_string(i / 3);
            c.population = 1000;
            geolex::geo::Ring ring;
            const double x0 = i, y0 = j;
            for (int k = 0; k < vertices; ++k) ring.push_back({x0 + static_cast<double>(k) / vertices, y0});
            for (int k = 0; k < vertices; ++k) ring.push_back({x0 + 1, y0 + static_cast<double>(k) / vertices});
            for (int k = 0; k < vertices; ++k) ring.push_back({x0 + 1 - static_cast<double>(k) / vertices, y0 + 1});
            for (int k = 0; k < vertices; ++k) ring.push_back({x0, y0 + 1 - static_cast<double>(k) / vertices});
            ring.push_back(ring.front());
            c.rings.push_back(std::move(ring));
            c.min_x = x0;
            c.min_y = y0;
            c.max_x = x0 + 1;
            c.max_y = y0 + 1;
            cs.push_back(std::move(c));
        }
    }
    return geolex::geo::GeoIndex(std::move(cs), {});
}

void BM_ReverseGeocode(benchmark::State& state) {
    const int grid = static_cast<int>(state.range(0));
    const auto idx = grid_index(grid, 25);
    geolex::stats::RngStream r(3, 0);
    std::vector<geolex::corpus::GeoPoint> pts(1000);
    for (auto& p : pts) p = {r.uniform01() * grid, r.uniform01() * grid};
    for (auto _ : state) {
        for (const auto& p : pts) benchmark::DoNotOptimize(geolex::geo::reverse_geocode(p, idx));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * pts.size()));
}
BENCHMARK(BM_ReverseGeocode)->Arg(6)->Arg(20);

void BM_L1Distance(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::vector<double> p(n, 1.0 / static_cast<double>(n)), q(n, 0.0);
    q[0] = 1.0;
    for (auto _ : state) benchmark::DoNotOptimize(geolex::geo::l1_distance(p, q));
}
BENCHMARK(BM_L1Distance)->Arg(30)->Arg(3000);

}  // namespace

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "geolex/demographics.hpp"

namespace {

using namespace geolex::demographics;

struct World {
    NameDemographics nd{2015};
    AgeBins bins;
    DemographicModel truth;
};

World make_world() {
    World w;
    const std::size_t cells = w.bins.size() * 2;
    for (std::size_t c = 0; c < cells; ++c) {
        const auto& bin = w.bins[c / 2];
        for (int k = 0; k < 3; ++k) {
            const std::string name = "n" + std::to_string(c) + "_" + std::to_string(k);
            for (int age = 0; age <= kMaxAge; ++age) {
                const bool inside = age >= bin.lo && age <= bin.hi;
                w.nd.add(name, c % 2 ? Sex::male : Sex::female, 2015 - age, inside ? 300 : 20);
            }
        }
    }
    const auto phi = build_phi(w.nd, w.bins, true, 0.01);
    w.truth.bins = w.bins;
    w.truth.names = phi.names;
    w.truth.phi = phi.phi;
    w.truth.pi = {0.2, 0.35, 0.25, 0.2};
    for (int j = 0; j < 200; ++j) w.truth.vocabulary.push_back("w" + std::to_string(1000 + j));
    w.truth.theta.assign(cells, std::vector<double>(200, 0.6 / 200));
    for (std::size_t c = 0; c < cells; ++c) {
        for (std::size_t j = 0; j < 10; ++j) w.truth.theta[c][c * 10 + j] += 0.04;
    }
    return w;
}

void BM_EmFit(benchmark::State& state) {
    const auto w = make_world();
    const auto syn = generate_synthetic(w.truth, static_cast<std::size_t>(state.range(0)), 30, 1);
    std::vector<EmUser> users;
    for (const auto& u : syn) users.push_back({u.name, u.token_counts});
    for (auto _ : state) benchmark::DoNotOptimize(em_fit(users, w.nd, w.bins));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * users.size()));
}
BENCHMARK(BM_EmFit)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_EmPosterior(benchmark::State& state) {
    const auto w = make_world();
    const auto syn = generate_synthetic(w.truth, 500, 30, 2);
    std::vector<EmUser> users;
    for (const auto& u : syn) users.push_back({u.name, u.token_counts});
    const auto model = em_fit(users, w.nd, w.bins);
    for (auto _ : state) {
        for (const auto& u : users) benchmark::DoNotOptimize(em_posterior(model, u.name, u.token_counts));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * users.size()));
}
BENCHMARK(BM_EmPosterior);

}  // namespace

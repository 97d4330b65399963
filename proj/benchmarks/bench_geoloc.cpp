#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "geolex/geoloc.hpp"
#include "geolex/stats.hpp"

namespace {

using namespace geolex::geoloc;

std::vector<LabeledUser> world(std::size_t classes, std::size_t per_class) {
    std::vector<std::string> words;
    for (int j = 0; j < 500; ++j) words.push_back("bg" + std::to_string(j));
    for (std::size_t k = 0; k < classes; ++k) {
        for (int j = 0; j < 5; ++j) words.push_back("mk" + std::to_string(k) + "_" + std::to_string(j));
    }
    geolex::stats::RngStream r(6, 0);
    std::vector<LabeledUser> users;
    for (std::size_t k = 0; k < classes; ++k) {
        std::vector<double> w(words.size(), 1.0);
        for (int j = 0; j < 5; ++j) w[500 + k * 5 + static_cast<std::size_t>(j)] = 10.0;
        for (std::size_t u = 0; u < per_class; ++u) {
            LabeledUser user;
            user.user_id = "u" + std::to_string(k * per_class + u);
            user.msa_id = "M" + std::to_string(100 + k);
            user.messages = 10;
            for (int t = 0; t < 100; ++t) ++user.token_counts[words[r.categorical(w)]];
            users.push_back(std::move(user));
        }
    }
    return users;
}

void BM_Train(benchmark::State& state) {
    const auto users = world(static_cast<std::size_t>(state.range(0)), 100);
    std::vector<const geolex::corpus::TokenCounts*> docs;
    for (const auto& u : users) docs.push_back(&u.token_counts);
    const auto vocab = Vocabulary::from_counts(docs);
    Dataset d;
    d.features = vocab.size();
    d.classes = static_cast<std::size_t>(state.range(0));
    for (std::size_t i = 0; i < users.size(); ++i) {
        d.x.push_back(featurize(users[i].token_counts, vocab));
        d.y.push_back(i / 100);
    }
    TrainConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(train(d, cfg));
}
BENCHMARK(BM_Train)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_CrossValidate(benchmark::State& state) {
    const auto users = world(10, 50);
    CvConfig cfg;
    cfg.folds = 5;
    cfg.lambda_grid = {0.1, 1.0};
    for (auto _ : state) benchmark::DoNotOptimize(cross_validate(users, cfg));
}
BENCHMARK(BM_CrossValidate)->Unit(benchmark::kMillisecond);

}  // namespace

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "geolex/corpus.hpp"
#include "geolex/stats.hpp"

namespace {

std::vector<std::string> messages(std::size_t n) {
    const std::vector<std::string> pieces{"yinz", "going", "dahn", "#steelers", "@friend", "lol!!", "it's", "\xE2\x9D\xA4",
                                          "the",  "game",  "tonight", "(really)", "don\xE2\x80\x99t", "A.B"};
    geolex::stats::RngStream r(1, 0);
    std::vector<std::string> out(n);
    for (auto& m : out) {
        for (int i = 0; i < 14; ++i) m += pieces[r.uniform_index(pieces.size())] + " ";
    }
    return out;
}

void BM_Tokenize(benchmark::State& state) {
    const auto ms = messages(1000);
    std::size_t bytes = 0;
    for (const auto& m : ms) bytes += m.size();
    for (auto _ : state) {
        for (const auto& m : ms) benchmark::DoNotOptimize(geolex::corpus::tokenize(m));
    }
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * bytes));
}
BENCHMARK(BM_Tokenize);

void BM_FilterCorpus(benchmark::State& state) {
    const auto n_users = static_cast<std::size_t>(state.range(0));
    std::vector<geolex::corpus::Message> ms;
    std::vector<geolex::corpus::UserProfile> ps;
    geolex::stats::RngStream r(2, 0);
    for (std::size_t u = 0; u < n_users; ++u) {
        geolex::corpus::UserProfile p;
        p.user_id = "u" + std::to_string(u);
        p.followers = static_cast<std::int64_t>(r.uniform_index(1500));
        p.followees = 10;
        p.statuses_total = 100;
        ps.push_back(p);
        const auto k = 1 + r.uniform_index(30);
        for (std::uint64_t i = 0; i < k; ++i) {
            geolex::corpus::Message m;
            m.message_id = p.user_id + "_" + std::to_string(i);
            m.user_id = p.user_id;
            m.text = "hello there";
            m.lang_tag = r.uniform01() < 0.05 ? "es" : "en";
            m.is_retweet = r.uniform01() < 0.05;
            ms.push_back(std::move(m));
        }
    }
    for (auto _ : state) benchmark::DoNotOptimize(geolex::corpus::filter_corpus(ms, ps));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * ms.size()));
}
BENCHMARK(BM_FilterCorpus)->Arg(1000)->Arg(10000);

}  // namespace

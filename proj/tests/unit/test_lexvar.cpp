#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "geolex/error.hpp"
#include "geolex/lexvar.hpp"
#include "geolex/stats.hpp"
#include "oracles.hpp"

using namespace geolex;
using namespace geolex::lexvar;

namespace {

struct Problem {
    corpus::TokenCounts background;
    std::vector<double> counts;
};

Problem random_problem(stats::RngStream& r, std::size_t vocab) {
    Problem p;
    p.counts.resize(vocab);
    for (std::size_t j = 0; j < vocab; ++j) {
        char buf[24];
        std::snprintf(buf, sizeof buf, "t%03zu", j);
        p.background[buf] = 1 + static_cast<std::int64_t>(r.uniform_index(200));
        p.counts[j] = static_cast<double>(r.uniform_index(6) == 0 ? 0 : r.uniform_index(40));
    }
    if (std::accumulate(p.counts.begin(), p.counts.end(), 0.0) == 0.0) p.counts[0] = 1.0;
    return p;
}

std::vector<double> softmax(std::span<const double> m, std::span<const double> eta) {
    std::vector<double> z(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) z[i] = m[i] + eta[i];
    const double lse = stats::log_sum_exp(z);
    for (auto& v : z) v = std::exp(v - lse);
    return z;
}

}  // namespace

TEST_CASE("background log-probabilities") {
    const auto bg = fit_background({{"a", 3}, {"b", 1}, {"z", 0}});
    REQUIRE(bg.vocabulary == std::vector<std::string>{"a", "b"});
    CHECK(bg.m[0] == doctest::Approx(std::log(0.75)));
    CHECK(bg.m[1] == doctest::Approx(std::log(0.25)));
    const auto sm = fit_background({{"a", 3}, {"b", 1}}, 1.0);
    CHECK(sm.m[0] == doctest::Approx(std::log(4.0 / 6.0)));
    CHECK_THROWS_AS(fit_background({{"a", 0}}), DataError);
    CHECK_THROWS_AS(bg.align({{"q", 1}}), DataError);
}

TEST_CASE("SAGE matches the exact optimum") {
    stats::RngStream r(2024, 0);
    for (int trial = 0; trial < 25; ++trial) {
        const auto p = random_problem(r, 10 + r.uniform_index(40));
        const auto bg = fit_background(p.background);
        for (const double lambda : {0.5, 2.0, 8.0}) {
            SageConfig cfg;
            cfg.lambda = lambda;
            const auto res = sage_fit(p.counts, bg, cfg);
            const auto eta = res.dense(bg.vocabulary.size());
            const auto want = testing::sage_exact(p.counts, bg.m, lambda);
            // The optimal eta can be non-unique in its shift (flat L1 when
            // positive and negative entries balance); the distribution is unique.
            const auto q = softmax(bg.m, eta);
            const auto q_want = softmax(bg.m, want);
            for (std::size_t j = 0; j < eta.size(); ++j) CHECK(std::abs(q[j] - q_want[j]) <= 1e-6);
            CHECK(res.objective ==
                  doctest::Approx(testing::sage_objective_ref(p.counts, bg.m, want, lambda)).epsilon(1e-9));
            CHECK(sage_objective(p.counts, bg.m, eta, lambda) ==
                  doctest::Approx(testing::sage_objective_ref(p.counts, bg.m, eta, lambda)).epsilon(1e-12));
        }
    }
}

TEST_CASE("SAGE solution satisfies the optimality conditions") {
    stats::RngStream r(5, 0);
    const auto p = random_problem(r, 60);
    const auto bg = fit_background(p.background);
    SageConfig cfg;
    cfg.lambda = 3.0;
    const auto res = sage_fit(p.counts, bg, cfg);
    const auto eta = res.dense(bg.vocabulary.size());
    const double total = std::accumulate(p.counts.begin(), p.counts.end(), 0.0);
    const auto q = softmax(bg.m, eta);
    for (std::size_t j = 0; j < eta.size(); ++j) {
        const double g = p.counts[j] - total * q[j];
        if (eta[j] == 0.0) CHECK(std::abs(g) <= cfg.lambda + 1e-5);
        else CHECK(std::abs(g - cfg.lambda * (eta[j] > 0 ? 1.0 : -1.0)) <= 1e-5);
    }
    CHECK(res.kkt_residual <= cfg.kkt_tol);
    for (std::size_t i = 1; i < res.objective_trace.size(); ++i) {
        CHECK(res.objective_trace[i] >= res.objective_trace[i - 1] - 1e-9 * std::abs(res.objective_trace[i - 1]));
    }
}

TEST_CASE("two-word unpenalized SAGE agrees with a grid search") {
    for (const auto& [c0, c1, b0, b1] : std::vector<std::array<double, 4>>{
             {30, 5, 500, 500}, {2, 40, 900, 100}, {10, 10, 300, 700}, {7, 1, 250, 750}}) {
        const auto bg = fit_background({{"a", static_cast<std::int64_t>(b0)}, {"b", static_cast<std::int64_t>(b1)}});
        const std::vector<double> counts{c0, c1};
        SageConfig cfg;
        cfg.lambda = 0.0;
        const auto eta = sage_fit(counts, bg, cfg).dense(2);
        const double e = testing::sage_two_word_grid(counts[0], counts[1], bg.m[0], bg.m[1]);
        CHECK(std::abs(eta[0] - e) <= 1e-3);
        CHECK(std::abs(eta[1] + e) <= 1e-3);
    }
}

TEST_CASE("SAGE sparsity is monotone in lambda") {
    stats::RngStream r(9, 0);
    const auto p = random_problem(r, 80);
    const auto bg = fit_background(p.background);
    std::size_t prev = bg.vocabulary.size() + 1;
    for (const double lambda : {0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 1e6}) {
        SageConfig cfg;
        cfg.lambda = lambda;
        const auto nz = sage_fit(p.counts, bg, cfg).nonzeros();
        CHECK(nz <= prev);
        prev = nz;
    }
    CHECK(prev == 0);
}

TEST_CASE("SAGE with counts proportional to the background is all zeros") {
    const auto bg = fit_background({{"a", 10}, {"b", 30}, {"c", 60}});
    const std::vector<double> counts{1, 3, 6};
    const auto res = sage_fit(counts, bg, SageConfig{});
    CHECK(res.nonzeros() == 0);
}

TEST_CASE("SAGE without penalty is centred") {
    const auto bg = fit_background({{"a", 1}, {"b", 1}, {"c", 2}});
    const std::vector<double> counts{5, 1, 2};
    SageConfig cfg;
    cfg.lambda = 0.0;
    const auto eta = sage_fit(counts, bg, cfg).dense(3);
    CHECK(std::accumulate(eta.begin(), eta.end(), 0.0) == doctest::Approx(0.0).scale(1.0));
    const auto q = softmax(bg.m, eta);
    CHECK(q[0] == doctest::Approx(5.0 / 8));
    CHECK(q[1] == doctest::Approx(1.0 / 8));
}

TEST_CASE("top_k ranks positive deviations with term tie-break") {
    const auto bg = fit_background({{"a", 1}, {"b", 1}, {"c", 1}, {"d", 1}});
    SageResult res;
    res.eta = {{0, 0.5}, {1, 0.9}, {2, 0.5}, {3, -2.0}};
    const auto top = top_k(res, bg, 2);
    REQUIRE(top.terms.size() == 2);
    CHECK(top.terms[0].term == "b");
    CHECK(top.terms[1].term == "a");
    CHECK_FALSE(top.warning.has_value());
    const auto all = top_k(res, bg, 5);
    CHECK(all.terms.size() == 3);
    CHECK(all.warning.has_value());
    const auto csv = salience_csv({{"g", top}});
    CHECK(csv.find("g,1,b,") != std::string::npos);
}

TEST_CASE("annotated lexicon parsing") {
    const auto lex = AnnotatedLexicon::parse_csv("term,label\nyinz,Nonstandard-Word\n\"#gopens\",Entity-Name\nthe,Other\n");
    CHECK(lex.size() == 3);
    CHECK(*lex.label("yinz") == Label::nonstandard_word);
    CHECK(lex.terms(Label::entity_name) == std::set<std::string>{"#gopens"});
    CHECK_THROWS_AS(AnnotatedLexicon::parse_csv("term,label\nx,Slang\n"), DataError);
    CHECK_THROWS_AS(AnnotatedLexicon::parse_csv("term,label\nx,Other\nx,Entity-Name\n"), DataError);
    const auto back = AnnotatedLexicon::parse_csv(lex.to_csv());
    CHECK(back.terms(Label::entity_name) == lex.terms(Label::entity_name));
}

TEST_CASE("lexicon rate") {
    const auto r = lexicon_rate({{"yinz", 3}, {"the", 7}, {"dahn", 0}}, {"yinz", "dahn", "absent"});
    CHECK(r.lexicon_tokens == 3);
    CHECK(r.total_tokens == 10);
    CHECK(r.rate == doctest::Approx(0.3));
    CHECK(r.per_term.size() == 3);
    CHECK(r.per_term.at("absent") == 0.0);
    CHECK_THROWS_AS(lexicon_rate({}, {"x"}), DataError);
}

TEST_CASE("paired t matches the reference") {
    stats::RngStream r(77, 0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> d(3 + r.uniform_index(30));
        for (auto& x : d) x = r.uniform01() - 0.4;
        const auto got = paired_t(d);
        const auto want = testing::reference_paired_t(d);
        CHECK(got.t == doctest::Approx(want.t).epsilon(1e-10));
        CHECK(got.df == want.df);
        CHECK(got.p == doctest::Approx(want.p).epsilon(1e-8));

        // Scale invariance and sign symmetry.
        std::vector<double> scaled(d), neg(d);
        for (auto& x : scaled) x *= 1000.0;
        for (auto& x : neg) x = -x;
        CHECK(paired_t(scaled).t == doctest::Approx(got.t).epsilon(1e-9));
        CHECK(paired_t(neg).t == doctest::Approx(-got.t).epsilon(1e-12));
        CHECK(paired_t(neg).p == doctest::Approx(got.p).epsilon(1e-12));
    }
}

TEST_CASE("paired t edge cases") {
    const std::vector<double> a{1, 2, 3}, b{0, 1, 2}, one{1};
    CHECK_THROWS_AS(paired_t(a, b), DomainError);
    CHECK_THROWS_AS(paired_t(one), DataError);
    const std::vector<double> c{0.5, 1.5, 2.0};
    const auto t = paired_t(a, c);
    CHECK(t.n == 3);
    CHECK(t.mean_diff == doctest::Approx((0.5 + 0.5 + 1.0) / 3));
}

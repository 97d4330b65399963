#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "fixtures.hpp"
#include "geolex/error.hpp"
#include "geolex/geoloc.hpp"
#include "geolex/stats.hpp"
#include "oracles.hpp"

using namespace geolex;
using namespace geolex::geoloc;

namespace {

Dataset to_dataset(const std::vector<LabeledUser>& users) {
    std::vector<const corpus::TokenCounts*> docs;
    for (const auto& u : users) docs.push_back(&u.token_counts);
    const auto vocab = Vocabulary::from_counts(docs);
    std::set<std::string> msas;
    for (const auto& u : users) msas.insert(u.msa_id);
    const std::vector<std::string> classes(msas.begin(), msas.end());
    Dataset d;
    d.features = vocab.size();
    d.classes = classes.size();
    for (const auto& u : users) {
        d.x.push_back(featurize(u.token_counts, vocab));
        d.y.push_back(static_cast<std::size_t>(std::lower_bound(classes.begin(), classes.end(), u.msa_id) - classes.begin()));
    }
    return d;
}

Dataset toy_dataset() {
    Dataset d;
    d.features = 3;
    d.classes = 3;
    d.x = {SparseVector{{{0, 2.0}}}, SparseVector{{{1, 1.0}, {2, 1.0}}}, SparseVector{{{2, 3.0}}},
           SparseVector{{{0, 1.0}, {2, 1.0}}}};
    d.y = {0, 1, 2, 0};
    return d;
}

}  // namespace

TEST_CASE("featurize keeps raw counts of known terms") {
    const Vocabulary v({"b", "a", "c"});
    CHECK(v.terms() == std::vector<std::string>{"a", "b", "c"});
    const auto x = featurize({{"c", 4}, {"a", 1}, {"zzz", 9}}, v);
    REQUIRE(x.entries.size() == 2);
    CHECK(x.entries[0] == std::pair<std::uint32_t, double>{0, 1.0});
    CHECK(x.entries[1] == std::pair<std::uint32_t, double>{2, 4.0});
}

TEST_CASE("objective gradient matches finite differences") {
    const auto d = toy_dataset();
    stats::RngStream r(6, 0);
    std::vector<double> params(d.classes * d.features + d.classes);
    for (auto& p : params) p = r.uniform01() - 0.5;
    std::vector<double> grad(params.size());
    objective(d, 0.7, params, grad);
    const auto f = [&](std::span<const double> x) {
        std::vector<double> g(x.size());
        return objective(d, 0.7, x, g);
    };
    const auto num = testing::numeric_gradient(f, params, 1e-5);
    for (std::size_t i = 0; i < params.size(); ++i) CHECK(grad[i] == doctest::Approx(num[i]).epsilon(1e-6).scale(1.0));
}

TEST_CASE("objective at zero is n log K") {
    const auto d = toy_dataset();
    std::vector<double> params(d.classes * d.features + d.classes, 0.0), grad(params.size());
    CHECK(objective(d, 1.0, params, grad) == doctest::Approx(4 * std::log(3.0)));
}

TEST_CASE("training lowers the objective monotonically and separates easy data") {
    const auto users = testing::geoloc_world(4, 40, 80, 3);
    const auto d = to_dataset(users);
    TrainConfig cfg;
    cfg.lambda = 0.1;
    const auto m = train(d, cfg);
    for (std::size_t i = 1; i < m.objective_trace.size(); ++i) CHECK(m.objective_trace[i] <= m.objective_trace[i - 1]);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < d.x.size(); ++i) {
        correct += m.predict(d.x[i]) == d.y[i];
        const auto p = m.probabilities(d.x[i]);
        CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0));
        for (const double v : p) CHECK(v >= 0.0);
    }
    CHECK(correct == d.x.size());
    // Stationarity of the returned point.
    std::vector<double> grad(m.parameters().size());
    objective(d, cfg.lambda, m.parameters(), grad);
    double gmax = 0;
    for (const double g : grad) gmax = std::max(gmax, std::abs(g));
    CHECK(gmax < 1e-3);
}

TEST_CASE("large ridge penalty leaves only the class prior") {
    Dataset d = toy_dataset();
    TrainConfig cfg;
    cfg.lambda = 1e8;
    const auto m = train(d, cfg);
    for (std::size_t k = 0; k < d.classes; ++k) {
        for (std::size_t j = 0; j < d.features; ++j) CHECK(std::abs(m.weight(k, j)) < 1e-6);
    }
    const auto p = m.probabilities(d.x[0]);
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(p[1] == doctest::Approx(0.25).epsilon(1e-4));
    CHECK(p[2] == doctest::Approx(0.25).epsilon(1e-4));
}

TEST_CASE("training input validation") {
    auto d = toy_dataset();
    TrainConfig cfg;
    cfg.lambda = 0.0;
    CHECK_THROWS_AS(train(d, cfg), ValidationError);
    cfg.lambda = 1.0;
    d.y = {0, 1, 1, 0};
    CHECK_THROWS_AS(train(d, cfg), DataError);
}

TEST_CASE("cross-validation partitions users and is deterministic") {
    const auto users = testing::geoloc_world(3, 30, 60, 8);
    CvConfig cfg;
    cfg.folds = 5;
    cfg.lambda_grid = {0.1, 10.0};
    cfg.seed = 12;
    const auto a = cross_validate(users, cfg);
    REQUIRE(a.predictions.size() == users.size());
    std::map<std::size_t, std::map<std::string, int>> per_fold;
    for (std::size_t i = 0; i < users.size(); ++i) {
        CHECK(a.predictions[i].user_id == users[i].user_id);
        CHECK(a.predictions[i].fold < 5);
        ++per_fold[a.predictions[i].fold][users[i].msa_id];
    }
    CHECK(per_fold.size() == 5);
    for (const auto& [fold, counts] : per_fold) {
        for (const auto& [msa, n] : counts) CHECK(n == 6);
    }
    CHECK(a.chosen_lambda.size() == 5);
    CHECK(a.dev_accuracy.size() == 5);
    const auto b = cross_validate(users, cfg);
    for (std::size_t i = 0; i < users.size(); ++i) {
        CHECK(a.predictions[i].predicted_msa == b.predictions[i].predicted_msa);
        CHECK(a.predictions[i].fold == b.predictions[i].fold);
    }
    std::size_t correct = 0;
    for (const auto& p : a.predictions) correct += p.correct();
    CHECK(static_cast<double>(correct) / static_cast<double>(users.size()) > 0.9);
    cfg.folds = 2;
    CHECK_THROWS_AS(cross_validate(users, cfg), ValidationError);
}

TEST_CASE("usage bins") {
    const UsageBins def;
    CHECK(def.edges() == std::vector<std::int64_t>{1, 10, 20, 40, 80, 160, 320});
    CHECK_FALSE(def.bin_of(0).has_value());
    CHECK(*def.bin_of(1) == 0);
    CHECK(*def.bin_of(9) == 0);
    CHECK(*def.bin_of(10) == 1);
    CHECK(*def.bin_of(319) == 5);
    CHECK(*def.bin_of(100000) == 6);
    CHECK_THROWS_AS(UsageBins({1, 1}), ValidationError);
    CHECK_THROWS_AS(UsageBins({0, 5}), ValidationError);
    std::vector<std::string> warnings;
    const std::vector<std::int64_t> counts{0, 5, 400};
    const auto bins = usage_bins(counts, def, &warnings);
    CHECK_FALSE(bins[0].has_value());
    CHECK(*bins[2] == 6);
    CHECK(warnings.size() == 1);
}

TEST_CASE("stratified accuracy") {
    const UsageBins usage({1, 10});
    const std::vector<bool> correct{true, false, true, true, false};
    const std::vector<std::string> stratum{"F", "F", "M", "M", "M"};
    const std::vector<std::optional<std::size_t>> bins{0, 1, 0, 0, 1};
    stats::BootstrapConfig bc;
    bc.seed = 1;
    const auto t = stratified_accuracy("gender", correct, stratum, {"F", "M", "X"}, bins, usage, bc);
    std::map<std::pair<std::string, std::string>, EvalRow> rows;
    for (const auto& r : t.rows) rows[{r.stratum, r.usage_bin}] = r;
    CHECK(*rows[{"F", "all"}].accuracy == doctest::Approx(0.5));
    CHECK(*rows[{"M", "all"}].accuracy == doctest::Approx(2.0 / 3));
    CHECK(rows[{"M", "all"}].n_users == 3);
    CHECK_FALSE(rows[{"X", "all"}].accuracy.has_value());
    CHECK(rows[{"X", "all"}].n_users == 0);
    const auto& f_low = rows[{"F", usage.label(0)}];
    CHECK(f_low.n_users == 1);
    CHECK_FALSE(f_low.ci_lo.has_value());

    // Soft weights: accuracy is the weighted mean.
    const std::vector<std::vector<double>> w{{0.5, 0.5}, {1.0, 0.0}, {0.0, 1.0}, {0.25, 0.75}, {0.5, 0.5}};
    const auto s = stratified_accuracy("soft", correct, w, {"A", "B"}, bins, usage, bc);
    const auto& a_all = *std::find_if(s.rows.begin(), s.rows.end(),
                                      [](const EvalRow& r) { return r.stratum == "A" && r.usage_bin == "all"; });
    CHECK(a_all.weight == doctest::Approx(2.25));
    CHECK(*a_all.accuracy == doctest::Approx((0.5 + 0.25) / 2.25));
    CHECK(s.to_csv().rfind("panel,stratum,usage_bin,n_users,weight,accuracy,ci_low,ci_high\n", 0) == 0);
}

TEST_CASE("predictions CSV round trip") {
    std::vector<PredictionRow> rows{{{"u1", "M1", "M2", 3}, "1-9", "F", "18-29"},
                                    {{"u2", "M2", "M2", 0}, "10+", "", ""}};
    const auto back = parse_predictions_csv(predictions_csv(rows));
    REQUIRE(back.size() == 2);
    CHECK(back[0].prediction.user_id == "u1");
    CHECK(back[0].prediction.predicted_msa == "M2");
    CHECK(back[1].usage_bin == "10+");
    CHECK(back[0].agebin_hat == "18-29");
}

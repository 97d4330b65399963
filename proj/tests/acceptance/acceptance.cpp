// Prints one PASS/FAIL line per acceptance criterion; exit status is the
// number of failures (0 when all pass).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "geolex/corpus.hpp"
#include "geolex/csv.hpp"
#include "geolex/demographics.hpp"
#include "geolex/geo.hpp"
#include "geolex/geoloc.hpp"
#include "geolex/lexvar.hpp"
#include "geolex/stats.hpp"
#include "oracles.hpp"

using namespace geolex;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
    bool ok = true;
    std::string detail;
    void require(bool cond, const std::string& what) {
        if (!cond) {
            if (ok) detail = what;
            ok = false;
        }
    }
};

// 1. EM recovery on 5,000 synthetic users.
Verdict em_recovery() {
    Verdict v;
    const auto t0 = Clock::now();
    const auto w = testing::em_world(0.01);
    const auto syn = demographics::generate_synthetic(w.truth, 5000, 30, 20240601);
    std::vector<demographics::EmUser> users;
    for (const auto& u : syn) users.push_back({u.name, u.token_counts});
    const auto m = demographics::em_fit(users, w.nd, w.bins);
    const double secs = seconds_since(t0);

    double l1 = 0.0;
    for (std::size_t b = 0; b < m.pi.size(); ++b) l1 += std::abs(m.pi[b] - w.truth.pi[b]);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < syn.size(); ++i) {
        const auto& p = m.posteriors[i];
        if (static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin()) == syn[i].cell) ++correct;
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(syn.size());
    std::size_t ll_drops = 0, obj_drops = 0;
    for (std::size_t i = 1; i < m.log_likelihood_trace.size(); ++i) {
        ll_drops += m.log_likelihood_trace[i] < m.log_likelihood_trace[i - 1];
        obj_drops += m.objective_trace[i] < m.objective_trace[i - 1];
    }
    std::ostringstream d;
    d << "pi L1=" << l1 << " accuracy=" << acc << " iterations=" << m.iterations
      << " loglik decreases=" << ll_drops << " objective decreases=" << obj_drops << " time=" << secs << "s";
    v.detail = d.str();
    v.require(l1 <= 0.05, "pi L1 " + std::to_string(l1) + " > 0.05");
    v.require(acc >= 0.90, "accuracy " + std::to_string(acc) + " < 0.90");
    v.require(ll_drops == 0, "log-likelihood decreased " + std::to_string(ll_drops) + " times");
    v.require(obj_drops == 0, "objective decreased");
    v.require(secs < 30.0, "runtime " + std::to_string(secs) + "s");
    if (v.ok) v.detail = d.str();
    return v;
}

// 2. SAGE correctness.
Verdict sage_correctness() {
    Verdict v;
    const auto bg = lexvar::fit_background({{"a", 100}, {"b", 300}, {"c", 600}});
    const std::vector<double> prop{10, 30, 60};
    lexvar::SageConfig cfg;
    cfg.lambda = 1.0;
    const auto zero = lexvar::sage_fit(prop, bg, cfg);
    v.require(zero.nonzeros() == 0, "(a) proportional group has nonzero eta");

    double worst_grid = 0.0;
    for (const auto& [c0, c1, b0, b1] : std::vector<std::array<double, 4>>{
             {30, 5, 500, 500}, {2, 40, 900, 100}, {10, 10, 300, 700}, {1, 99, 50, 950}}) {
        const auto bg2 = lexvar::fit_background(
            {{"a", static_cast<std::int64_t>(b0)}, {"b", static_cast<std::int64_t>(b1)}});
        const std::vector<double> counts{c0, c1};
        lexvar::SageConfig c0cfg;
        c0cfg.lambda = 0.0;
        const auto eta = lexvar::sage_fit(counts, bg2, c0cfg).dense(2);
        const double e = testing::sage_two_word_grid(c0, c1, bg2.m[0], bg2.m[1]);
        worst_grid = std::max({worst_grid, std::abs(eta[0] - e), std::abs(eta[1] + e)});
    }
    v.require(worst_grid <= 1e-3, "(b) two-word grid mismatch " + std::to_string(worst_grid));

    stats::RngStream r(2, 0);
    std::vector<double> counts(120);
    corpus::TokenCounts background;
    for (std::size_t j = 0; j < counts.size(); ++j) {
        char buf[24];
        std::snprintf(buf, sizeof buf, "t%03zu", j);
        background[buf] = 1 + static_cast<std::int64_t>(r.uniform_index(300));
        counts[j] = static_cast<double>(r.uniform_index(50));
    }
    const auto bg3 = lexvar::fit_background(background);
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    double worst_kkt = 0.0;
    std::size_t prev = counts.size() + 1;
    bool monotone = true;
    std::ostringstream nz;
    for (const double lambda : {0.5, 2.0, 5.0, 10.0, 20.0}) {
        lexvar::SageConfig sc;
        sc.lambda = lambda;
        const auto res = lexvar::sage_fit(counts, bg3, sc);
        const auto eta = res.dense(counts.size());
        std::vector<double> z(counts.size());
        for (std::size_t j = 0; j < z.size(); ++j) z[j] = bg3.m[j] + eta[j];
        const double lse = stats::log_sum_exp(z);
        for (std::size_t j = 0; j < z.size(); ++j) {
            const double g = counts[j] - total * std::exp(z[j] - lse);
            const double slack =
                eta[j] == 0.0 ? std::max(0.0, std::abs(g) - lambda) : std::abs(g - lambda * (eta[j] > 0 ? 1 : -1));
            worst_kkt = std::max(worst_kkt, slack);
        }
        monotone = monotone && res.nonzeros() <= prev;
        prev = res.nonzeros();
        nz << (nz.tellp() > 0 ? "," : "") << res.nonzeros();
    }
    v.require(worst_kkt <= 1e-5, "(c) KKT slack " + std::to_string(worst_kkt));
    v.require(monotone, "(d) nonzeros not monotone: " + nz.str());
    if (v.ok) {
        std::ostringstream d;
        d << "grid err=" << worst_grid << " kkt slack=" << worst_kkt << " nonzeros=" << nz.str();
        v.detail = d.str();
    }
    return v;
}

// 3. Geolocation sanity.
Verdict geolocation() {
    Verdict v;
    const auto t0 = Clock::now();
    auto users = testing::geoloc_world(10, 200, 100, 31337);
    geoloc::CvConfig cfg;
    cfg.folds = 10;
    cfg.lambda_grid = {0.1, 1.0, 10.0};
    cfg.seed = 7;
    const auto res = geoloc::cross_validate(users, cfg);
    std::size_t correct = 0;
    for (const auto& p : res.predictions) correct += p.correct();
    const double acc = static_cast<double>(correct) / static_cast<double>(users.size());

    // Shuffled labels: no text signal remains.
    std::vector<std::string> labels;
    for (const auto& u : users) labels.push_back(u.msa_id);
    stats::RngStream r(99, 0);
    r.shuffle(labels);
    for (std::size_t i = 0; i < users.size(); ++i) users[i].msa_id = labels[i];
    const auto shuffled = geoloc::cross_validate(users, cfg);
    std::vector<double> hits;
    for (const auto& p : shuffled.predictions) hits.push_back(p.correct() ? 1.0 : 0.0);
    stats::BootstrapConfig bc;
    bc.seed = 5;
    const auto ci = stats::bootstrap_mean_ci(hits, bc);

    // Finite-difference gradient on a small slice.
    const auto small = testing::geoloc_world(3, 10, 30, 4);
    std::vector<const corpus::TokenCounts*> docs;
    for (const auto& u : small) docs.push_back(&u.token_counts);
    const auto vocab = geoloc::Vocabulary::from_counts(docs);
    geoloc::Dataset d;
    d.features = vocab.size();
    d.classes = 3;
    for (std::size_t i = 0; i < small.size(); ++i) {
        d.x.push_back(geoloc::featurize(small[i].token_counts, vocab));
        d.y.push_back(i / 10);
    }
    std::vector<double> params(d.classes * d.features + d.classes);
    for (auto& p : params) p = 0.1 * (r.uniform01() - 0.5);
    std::vector<double> grad(params.size());
    geoloc::objective(d, 0.5, params, grad);
    const auto num = testing::numeric_gradient(
        [&](std::span<const double> x) {
            std::vector<double> g(x.size());
            return geoloc::objective(d, 0.5, x, g);
        },
        params, 1e-5);
    double worst = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
        worst = std::max(worst, std::abs(grad[i] - num[i]) / std::max(1.0, std::abs(num[i])));
    }
    const double secs = seconds_since(t0);
    v.require(acc >= 0.95, "accuracy " + std::to_string(acc));
    v.require(ci.lo <= 0.10 && 0.10 <= ci.hi, "shuffled CI excludes 0.10");
    v.require(worst <= 1e-4, "gradient relative error " + std::to_string(worst));
    v.require(secs < 120.0, "runtime " + std::to_string(secs) + "s");
    std::ostringstream out;
    out << "accuracy=" << acc << " shuffled=" << ci.point << " CI=[" << ci.lo << ", " << ci.hi
        << "] grad err=" << worst << " time=" << secs << "s";
    if (v.ok) v.detail = out.str();
    else v.detail += " (" + out.str() + ")";
    return v;
}

// 4. Expected-age ordering between a young-skewed and an older sample.
Verdict demographic_bias() {
    Verdict v;
    demographics::NameDemographics nd(2015);
    stats::RngStream r(12, 0);
    std::vector<std::string> young, old;
    for (int k = 0; k < 20; ++k) {
        const std::string y = "young" + std::to_string(k), o = "old" + std::to_string(k);
        young.push_back(y);
        old.push_back(o);
        for (int age = 0; age <= demographics::kMaxAge; ++age) {
            const double wy = std::exp(-0.5 * std::pow((age - 24.0) / 8.0, 2));
            const double wo = std::exp(-0.5 * std::pow((age - 52.0) / 12.0, 2));
            nd.add(y, demographics::Sex::female, 2015 - age, 1 + static_cast<std::int64_t>(1000 * wy));
            nd.add(o, demographics::Sex::male, 2015 - age, 1 + static_cast<std::int64_t>(1000 * wo));
        }
    }
    std::vector<std::string> a, b;
    for (int i = 0; i < 800; ++i) {
        const bool skew_a = r.uniform01() < 0.7, skew_b = r.uniform01() < 0.3;
        a.push_back((skew_a ? young : old)[r.uniform_index(20)]);
        b.push_back((skew_b ? young : old)[r.uniform_index(20)]);
    }
    stats::BootstrapConfig bc;
    bc.seed = 3;
    const auto ea = demographics::expected_age(a, nd, bc);
    const auto eb = demographics::expected_age(b, nd, bc);
    v.require(ea.point < eb.point, "A not younger than B");
    v.require(ea.hi < eb.lo, "intervals overlap");
    std::ostringstream d;
    d << "A=" << ea.point << " [" << ea.lo << ", " << ea.hi << "] B=" << eb.point << " [" << eb.lo << ", " << eb.hi
      << "]";
    if (v.ok) v.detail = d.str();
    return v;
}

// 5. L1 distance properties.
Verdict l1_properties() {
    Verdict v;
    stats::RngStream r(55, 0);
    double worst = 0.0;
    auto simplex = [&](std::size_t n) {
        std::vector<double> p(n);
        double s = 0;
        for (auto& x : p) s += (x = -std::log(1.0 - r.uniform01()));
        for (auto& x : p) x /= s;
        return p;
    };
    for (int i = 0; i < 1000; ++i) {
        const std::size_t n = 2 + r.uniform_index(30);
        const auto p = simplex(n), q = simplex(n);
        const double d = geo::l1_distance(p, q);
        worst = std::max(worst, std::abs(d - testing::l1_bruteforce(p, q)));
        v.require(d >= 0.0 && d <= 2.0, "bounds");
        v.require(d == geo::l1_distance(q, p), "symmetry");
        v.require(geo::l1_distance(p, p) == 0.0, "identity");
        v.require(!(d == 0.0) || p == q, "indiscernibles");
    }
    v.require(worst <= 1e-12, "brute-force mismatch " + std::to_string(worst));
    if (v.ok) {
        std::ostringstream d;
        d << "max |l1 - brute force| = " << worst;
        v.detail = d.str();
    }
    return v;
}

// 6. Name-prior normalization, mixture linearity and the worked example.
Verdict name_priors() {
    Verdict v;
    demographics::NameDemographics nd(2015);
    nd.add("dana", demographics::Sex::female, 1995, 30);
    nd.add("dana", demographics::Sex::female, 1975, 10);
    const auto ex = demographics::name_age_dist("dana", nd);
    v.require(ex->p[20] == 0.75 && ex->p[40] == 0.25, "worked example");
    stats::RngStream r(66, 0);
    std::vector<std::string> pool;
    for (int k = 0; k < 25; ++k) {
        pool.push_back("n" + std::to_string(k));
        for (int j = 0; j < 8; ++j) {
            nd.add(pool.back(), j % 2 ? demographics::Sex::male : demographics::Sex::female,
                   1920 + static_cast<int>(r.uniform_index(96)), 1 + static_cast<std::int64_t>(r.uniform_index(999)));
        }
    }
    double worst_norm = 0.0, worst_lin = 0.0;
    for (const auto& n : pool) {
        const auto d = demographics::name_age_dist(n, nd);
        worst_norm = std::max(worst_norm, std::abs(std::accumulate(d->p.begin(), d->p.end(), 0.0) - 1.0));
    }
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> all;
        const auto n = 2 + r.uniform_index(60);
        for (std::uint64_t i = 0; i < n; ++i) all.push_back(pool[r.uniform_index(pool.size())]);
        const auto cut = 1 + r.uniform_index(all.size() - 1);
        const std::vector<std::string> a(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(cut));
        const std::vector<std::string> b(all.begin() + static_cast<std::ptrdiff_t>(cut), all.end());
        const auto pa = demographics::sample_age_dist(a, nd).distribution.p;
        const auto pb = demographics::sample_age_dist(b, nd).distribution.p;
        const auto pall = demographics::sample_age_dist(all, nd).distribution.p;
        const double wa = static_cast<double>(a.size()) / static_cast<double>(all.size());
        for (int age = 0; age < demographics::kNumAges; ++age) {
            worst_lin = std::max(worst_lin, std::abs(pall[age] - (wa * pa[age] + (1 - wa) * pb[age])));
        }
        worst_norm = std::max(worst_norm, std::abs(std::accumulate(pall.begin(), pall.end(), 0.0) - 1.0));
    }
    v.require(worst_norm <= 1e-9, "normalization " + std::to_string(worst_norm));
    v.require(worst_lin <= 1e-12, "linearity " + std::to_string(worst_lin));
    if (v.ok) {
        std::ostringstream d;
        d << "normalization err=" << worst_norm << " linearity err=" << worst_lin;
        v.detail = d.str();
    }
    return v;
}

// 7. Paired t against the reference.
Verdict paired_t() {
    Verdict v;
    stats::RngStream r(77, 0);
    double worst_t = 0.0, worst_p = 0.0, worst_scale = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> d(5 + r.uniform_index(60));
        for (auto& x : d) x = 0.002 * (r.uniform01() - 0.45);
        const auto got = lexvar::paired_t(d);
        const auto want = testing::reference_paired_t(d);
        worst_t = std::max(worst_t, std::abs(got.t - want.t));
        worst_p = std::max(worst_p, std::abs(got.p - want.p));
        auto scaled = d;
        for (auto& x : scaled) x *= 37.5;
        worst_scale = std::max(worst_scale, std::abs(lexvar::paired_t(scaled).t - got.t));
    }
    v.require(worst_t <= 1e-8, "t error " + std::to_string(worst_t));
    v.require(worst_p <= 1e-6, "p error " + std::to_string(worst_p));
    v.require(worst_scale <= 1e-8, "scale invariance " + std::to_string(worst_scale));
    std::ostringstream out;
    out << "t err=" << worst_t << " p err=" << worst_p << " scale err=" << worst_scale;
    if (v.ok) v.detail = out.str();
    return v;
}

// 8. Bootstrap coverage and determinism.
Verdict bootstrap_coverage() {
    Verdict v;
    int covered = 0;
    for (int trial = 0; trial < 100; ++trial) {
        stats::RngStream r(1000 + static_cast<std::uint64_t>(trial), 0);
        std::vector<double> x(10000);
        for (auto& b : x) b = r.uniform01() < 0.5 ? 1.0 : 0.0;
        stats::BootstrapConfig bc;
        bc.seed = static_cast<std::uint64_t>(trial);
        const auto ci = stats::bootstrap_mean_ci(x, bc);
        covered += ci.lo <= 0.5 && 0.5 <= ci.hi;
        if (trial == 0) {
            const auto again = stats::bootstrap_mean_ci(x, bc);
            v.require(again.lo == ci.lo && again.hi == ci.hi, "not deterministic per seed");
        }
    }
    v.require(covered >= 90, "coverage " + std::to_string(covered) + "/100");
    if (v.ok) v.detail = "covered " + std::to_string(covered) + "/100";
    return v;
}

// 9. Two CLI runs on the bundled demo give byte-identical CSVs.
Verdict pipeline_determinism() {
    Verdict v;
    const fs::path work = fs::temp_directory_path() / "geolex_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);
    const std::string config = std::string(GEOLEX_DEMO_DIR) + "/geolex.toml";
    const auto t0 = Clock::now();
    for (const char* run : {"a", "b"}) {
        const std::string cmd = std::string("\"") + GEOLEX_CLI_PATH + "\" run -q --force -c \"" + config + "\" -o \"" +
                                (work / run).string() + "\"";
        const int status = std::system(cmd.c_str());
        if (status != 0) {
            v.require(false, "geolex run failed: " + cmd);
            return v;
        }
    }
    const double secs = seconds_since(t0);
    std::size_t compared = 0, differing = 0;
    std::string first_diff;
    for (const auto& e : fs::recursive_directory_iterator(work / "a")) {
        if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
        const auto rel = fs::relative(e.path(), work / "a");
        ++compared;
        const auto other = work / "b" / rel;
        if (!fs::exists(other) || csv::read_file(e.path().string()) != csv::read_file(other.string())) {
            if (differing++ == 0) first_diff = rel.string();
        }
    }
    v.require(compared > 0, "no CSV outputs");
    v.require(differing == 0, std::to_string(differing) + " CSVs differ, first " + first_diff);
    v.require(secs / 2 < 60.0, "end-to-end " + std::to_string(secs / 2) + "s per run");
    std::ostringstream d;
    d << compared << " CSVs identical, " << secs / 2 << "s per run";
    if (v.ok) v.detail = d.str();
    fs::remove_all(work);
    return v;
}

// 10. Filter cascade fixture.
Verdict filter_cascade() {
    Verdict v;
    const auto f = testing::filter_fixture();
    const auto r = corpus::filter_corpus(f.messages, f.profiles);
    std::set<std::string> got;
    for (const auto& m : r.corpus.messages) got.insert(m.message_id);
    v.require(got == f.survivors, "survivor set differs");
    const auto& e = f.expected;
    v.require(r.report.retweet == e.retweet && r.report.url == e.url && r.report.follower_cap == e.follower_cap &&
                  r.report.status_cap == e.status_cap && r.report.top_decile == e.top_decile &&
                  r.report.non_english == e.non_english,
              "exclusion counts differ");
    v.require(r.report.input_count == 30 && r.report.input_count == r.report.output_count + r.report.total_excluded(),
              "report does not reconcile");
    if (v.ok) {
        v.detail = std::to_string(r.report.input_count) + " in, " + std::to_string(r.report.output_count) +
                   " survivors, " + std::to_string(r.report.total_excluded()) + " excluded";
    }
    return v;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"1 EM recovery", em_recovery},
        {"2 SAGE correctness", sage_correctness},
        {"3 geolocation sanity", geolocation},
        {"4 demographic-bias measurement", demographic_bias},
        {"5 L1 representativeness", l1_properties},
        {"6 name-prior suite", name_priors},
        {"7 paired t-test", paired_t},
        {"8 bootstrap coverage", bootstrap_coverage},
        {"9 pipeline determinism", pipeline_determinism},
        {"10 filter cascade", filter_cascade},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        Verdict v;
        try {
            v = check();
        } catch (const std::exception& e) {
            v.ok = false;
            v.detail = std::string("exception: ") + e.what();
        }
        failures += !v.ok;
        std::printf("%s criterion %s: %s\n", v.ok ? "PASS" : "FAIL", name.c_str(), v.detail.c_str());
        std::fflush(stdout);
    }
    return failures;
}

#include <doctest.h>

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "geolex/error.hpp"
#include "geolex/geo.hpp"
#include "geolex/stats.hpp"
#include "oracles.hpp"

using namespace geolex;
using geolex::testing::county;

namespace {

geo::GeoIndex two_county_index() {
    std::vector<geo::County> cs{county("A", "M1", 100, 0, 0, 1, 1), county("B", "M1", 100, 1, 0, 2, 1)};
    std::vector<geo::GazetteerEntry> gaz{{"chicago", "IL", "M1"}};
    return geo::GeoIndex(std::move(cs), std::move(gaz), {{"M1", "Chicago"}});
}

std::vector<double> random_simplex(stats::RngStream& r, std::size_t n) {
    std::vector<double> v(n);
    double s = 0.0;
    for (auto& x : v) {
        x = -std::log(1.0 - r.uniform01());
        s += x;
    }
    for (auto& x : v) x /= s;
    return v;
}

}  // namespace

TEST_CASE("reverse geocoding examples") {
    const auto idx = two_county_index();
    CHECK(geo::reverse_geocode({0.5, 0.5}, idx) == std::optional<std::string>("A"));
    CHECK_FALSE(geo::reverse_geocode({5, 5}, idx).has_value());
    // Shared edge x = 1 belongs to the lower county id.
    CHECK(geo::reverse_geocode({0.5, 1.0}, idx) == std::optional<std::string>("A"));
    CHECK_THROWS_AS(geo::reverse_geocode({95.0, 0.0}, idx), DomainError);
}

TEST_CASE("reverse geocoding agrees with containment") {
    const auto idx = two_county_index();
    stats::RngStream r(4, 0);
    for (int i = 0; i < 2000; ++i) {
        const corpus::GeoPoint p{-0.5 + 2.0 * r.uniform01(), -0.5 + 3.0 * r.uniform01()};
        const auto c = geo::reverse_geocode(p, idx);
        if (c) CHECK(geo::county_contains(*idx.find_county(*c), p));
        else
            for (const auto& k : idx.counties()) CHECK_FALSE(geo::county_contains(k, p));
    }
}

TEST_CASE("holes are excluded by even-odd containment") {
    auto c = county("H", "M1", 10, 0, 0, 4, 4);
    c.rings.push_back(testing::square(1, 1, 2, 2));
    CHECK(geo::county_contains(c, {0.5, 0.5}));
    CHECK_FALSE(geo::county_contains(c, {1.5, 1.5}));
}

TEST_CASE("location field matching") {
    const auto idx = two_county_index();
    CHECK(geo::match_location_field("Chicago", idx) == std::optional<std::string>("M1"));
    CHECK(geo::match_location_field("chicago ,IL", idx) == std::optional<std::string>("M1"));
    CHECK(geo::match_location_field("  CHICAGO, il  ", idx) == std::optional<std::string>("M1"));
    CHECK_FALSE(geo::match_location_field("Pixburgh", idx).has_value());
    CHECK_FALSE(geo::match_location_field("Chicago, TX", idx).has_value());
}

TEST_CASE("ambiguous bare city names do not match") {
    std::vector<geo::County> cs{county("A", "M1", 1, 0, 0, 1, 1), county("B", "M2", 1, 5, 5, 6, 6)};
    std::vector<geo::GazetteerEntry> gaz{{"springfield", "IL", "M1"}, {"springfield", "MO", "M2"}};
    const geo::GeoIndex idx(std::move(cs), std::move(gaz));
    CHECK_FALSE(geo::match_location_field("Springfield", idx).has_value());
    CHECK(geo::match_location_field("Springfield, MO", idx) == std::optional<std::string>("M2"));
}

TEST_CASE("l1 distance examples") {
    const std::vector<double> a{0.5, 0.5}, b{0.75, 0.25}, e1{1, 0}, e2{0, 1};
    CHECK(geo::l1_distance(a, a) == 0.0);
    CHECK(geo::l1_distance(e1, e2) == doctest::Approx(2.0));
    CHECK(geo::l1_distance(a, b) == doctest::Approx(0.5));
    const std::vector<double> short_v{1.0};
    CHECK_THROWS_AS(geo::l1_distance(a, short_v), DomainError);
    const std::vector<double> bad{0.7, 0.7};
    CHECK_THROWS_AS(geo::l1_distance(a, bad), DomainError);
}

TEST_CASE("l1 distance is a metric on the simplex") {
    stats::RngStream r(12, 0);
    for (int i = 0; i < 300; ++i) {
        const std::size_t n = 2 + r.uniform_index(6);
        const auto p = random_simplex(r, n), q = random_simplex(r, n), s = random_simplex(r, n);
        const double pq = geo::l1_distance(p, q);
        CHECK(pq == doctest::Approx(testing::l1_bruteforce(p, q)).epsilon(1e-12));
        CHECK(pq == geo::l1_distance(q, p));
        CHECK(pq <= geo::l1_distance(p, s) + geo::l1_distance(s, q) + 1e-12);
        CHECK(pq >= 0.0);
        CHECK(pq <= 2.0 + 1e-12);
    }
}

TEST_CASE("representation table arithmetic") {
    std::vector<geo::County> cs{county("A", "M1", 75, 0, 0, 1, 1), county("B", "M1", 25, 1, 0, 2, 1),
                                county("C", "M2", 50, 5, 5, 6, 6), county("D", "M2", 50, 6, 5, 7, 6),
                                county("E", "M3", 10, 9, 9, 10, 10)};
    const geo::GeoIndex idx(std::move(cs), {});
    std::vector<geo::GeocodedMessage> msgs;
    for (int i = 0; i < 50; ++i) msgs.push_back({"a" + std::to_string(i), "ua" + std::to_string(i), "A", "M1"});
    for (int i = 0; i < 50; ++i) msgs.push_back({"b" + std::to_string(i), "ub" + std::to_string(i), "B", "M1"});
    for (int i = 0; i < 10; ++i) msgs.push_back({"c" + std::to_string(i), "uc", "C", "M2"});
    const auto t = geo::representation_table(msgs, idx);
    REQUIRE(t.msas.size() == 3);
    const auto& m1 = t.msas[0];
    CHECK(m1.counties[0].tweet_share == doctest::Approx(0.5));
    CHECK(m1.counties[1].tweet_share == doctest::Approx(0.5));
    CHECK(*m1.l1_population_tweets == doctest::Approx(0.5));
    CHECK(*t.msas[1].l1_population_tweets == doctest::Approx(1.0));
    CHECK(*t.msas[1].l1_population_users == doctest::Approx(1.0));
    CHECK_FALSE(t.msas[2].l1_population_tweets.has_value());
    for (const auto& m : t.msas) {
        if (m.tweets == 0) continue;
        double ps = 0, us = 0, ts = 0;
        for (const auto& c : m.counties) {
            ps += c.population_share;
            us += c.user_share;
            ts += c.tweet_share;
        }
        CHECK(ps == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(us == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(ts == doctest::Approx(1.0).epsilon(1e-9));
    }
    const auto text = geo::representation_csv(t);
    CHECK(text.rfind("msa,county,pop_share,user_share,tweet_share\n", 0) == 0);
}

TEST_CASE("representation table lists every county of the MSA") {
    std::vector<geo::County> cs;
    for (int i = 0; i < 23; ++i) {
        cs.push_back(county("NY" + std::to_string(100 + i), "NYC", 1000 + i, i, 0, i + 1, 1));
    }
    const geo::GeoIndex idx(std::move(cs), {});
    const auto t = geo::representation_table({{"m", "u", "NY100", "NYC"}}, idx);
    REQUIRE(t.msas.size() == 1);
    CHECK(t.msas[0].counties.size() == 23);
}

TEST_CASE("GeoJSON loader validates geometry") {
    const std::string ok = R"({"type":"FeatureCollection","features":[{"type":"Feature",
      "properties":{"county_id":"A","msa_id":"M","population":5},
      "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]]]}}]})";
    const auto cs = geo::parse_counties_geojson(ok);
    REQUIRE(cs.size() == 1);
    CHECK(cs[0].population == 5);
    const std::string open_ring = R"({"type":"FeatureCollection","features":[{"type":"Feature",
      "properties":{"county_id":"A","msa_id":"M","population":5},
      "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0.5]]]}}]})";
    CHECK_THROWS_AS(geo::GeoIndex(geo::parse_counties_geojson(open_ring), {}), DataError);
    const std::string no_pop = R"({"type":"FeatureCollection","features":[{"type":"Feature",
      "properties":{"county_id":"A","msa_id":"M"},
      "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]]]}}]})";
    CHECK_THROWS_AS(geo::parse_counties_geojson(no_pop), DataError);
}

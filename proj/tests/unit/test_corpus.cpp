#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "geolex/corpus.hpp"
#include "geolex/error.hpp"
#include "geolex/stats.hpp"

using namespace geolex;
using geolex::testing::filter_fixture;

namespace {

std::set<std::string> ids(const std::vector<corpus::Message>& ms) {
    std::set<std::string> out;
    for (const auto& m : ms) out.insert(m.message_id);
    return out;
}

}  // namespace

TEST_CASE("parse_messages maps fields") {
    std::istringstream in(
        R"({"id":"1","text":"hello","lang":"en","coordinates":null,"user":{"id":"u","name":"Ann Lee","location":"Chicago, IL","followers_count":5,"friends_count":6,"statuses_count":7}})"
        "\n"
        R"({"id":"2","text":"there","lang":"en","coordinates":[-84.39,33.75],"user":{"id":"u","name":"Ann Lee"}})"
        "\n"
        "not json at all\n");
    const auto parsed = corpus::parse_messages(in);
    REQUIRE(parsed.messages.size() == 2);
    CHECK(parsed.errors.count == 1);
    CHECK_FALSE(parsed.messages[0].geo.has_value());
    CHECK(parsed.messages[0].lang_tag == "en");
    REQUIRE(parsed.messages[1].geo.has_value());
    CHECK(parsed.messages[1].geo->lat == doctest::Approx(33.75));
    CHECK(parsed.messages[1].geo->lon == doctest::Approx(-84.39));
    REQUIRE(parsed.profiles.size() == 1);
}

TEST_CASE("parse_messages with no parseable line is a data error") {
    std::istringstream in("garbage\n{also bad\n");
    CHECK_THROWS_AS(corpus::parse_messages(in), DataError);
}

TEST_CASE("to_json_line round-trips through parse_messages") {
    auto m = testing::message("9", "u9", "round trip \"quoted\"");
    m.geo = corpus::GeoPoint{40.5, -80.25};
    m.has_url = true;
    m.timestamp = 1400000000;
    auto p = testing::profile("u9", "Zoe Q", 1, 2, 3);
    p.location_field = "Pittsburgh, PA";
    std::istringstream in(corpus::to_json_line(m, p) + "\n");
    const auto parsed = corpus::parse_messages(in);
    REQUIRE(parsed.messages.size() == 1);
    CHECK(parsed.messages[0] == m);
    CHECK(parsed.profiles[0] == p);
}

TEST_CASE("tokenize examples") {
    using V = std::vector<std::string>;
    CHECK(corpus::tokenize("Yinz going dahn?") == V{"yinz", "going", "dahn"});
    CHECK(corpus::tokenize("I \xE2\x9D\xA4 NYC #nyc") == V{"i", "\xE2\x9D\xA4", "nyc", "#nyc"});
    CHECK(corpus::tokenize("@bob hi") == V{"hi"});
    CHECK(corpus::tokenize("don\xE2\x80\x99t stop") == V{"don't", "stop"});
}

TEST_CASE("tokenize is idempotent on its joined output") {
    stats::RngStream r(1, 0);
    const std::vector<std::string> pieces{"Hello", "#Tag", "@who", "wow!!", "(paren)", "it's", "\xE2\x9D\xA4",
                                          "...",   "A.B",  "x",    "\"q\"", "emoji\xF0\x9F\x98\x80"};
    for (int trial = 0; trial < 200; ++trial) {
        std::string text;
        const auto n = 1 + r.uniform_index(8);
        for (std::uint64_t i = 0; i < n; ++i) text += pieces[r.uniform_index(pieces.size())] + " ";
        const auto once = corpus::tokenize(text);
        std::string joined;
        for (const auto& t : once) joined += t + " ";
        CHECK(corpus::tokenize(joined) == once);
    }
}

TEST_CASE("RT marker detection") {
    CHECK(corpus::has_rt_marker("RT @x: hi"));
    CHECK(corpus::has_rt_marker("rt: hi"));
    CHECK_FALSE(corpus::has_rt_marker("art is nice"));
    CHECK_FALSE(corpus::has_rt_marker(""));
}

TEST_CASE("filter cascade reproduces the hand-computed fixture") {
    const auto f = filter_fixture();
    const auto r = corpus::filter_corpus(f.messages, f.profiles);
    CHECK(ids(r.corpus.messages) == f.survivors);
    CHECK(r.report.retweet == f.expected.retweet);
    CHECK(r.report.url == f.expected.url);
    CHECK(r.report.follower_cap == f.expected.follower_cap);
    CHECK(r.report.status_cap == f.expected.status_cap);
    CHECK(r.report.top_decile == f.expected.top_decile);
    CHECK(r.report.non_english == f.expected.non_english);
    CHECK(r.report.output_count == f.expected.output_count);
    CHECK(r.report.input_count == r.report.output_count + r.report.total_excluded());
}

TEST_CASE("filter cascade is a subset and invariant to input order") {
    const auto f = filter_fixture();
    const auto base = ids(corpus::filter_corpus(f.messages, f.profiles).corpus.messages);
    const auto input = ids(f.messages);
    for (const auto& id : base) CHECK(input.count(id) == 1);
    stats::RngStream r(17, 0);
    for (int trial = 0; trial < 20; ++trial) {
        auto shuffled = f.messages;
        r.shuffle(shuffled);
        const auto res = corpus::filter_corpus(shuffled, f.profiles);
        CHECK(ids(res.corpus.messages) == base);
        CHECK(res.report.input_count == res.report.output_count + res.report.total_excluded());
    }
}

TEST_CASE("top-decile rule removes the heaviest user with id tie-break") {
    std::vector<corpus::Message> ms;
    std::vector<corpus::UserProfile> ps;
    for (int u = 1; u <= 10; ++u) {
        const std::string uid = "user" + std::to_string(u);
        ps.push_back(testing::profile(uid));
        for (int k = 0; k < u; ++k) ms.push_back(testing::message(uid + "_" + std::to_string(k), uid, "x"));
    }
    auto r = corpus::filter_corpus(ms, ps);
    CHECK(r.report.top_decile == 10);
    CHECK(r.report.users_top_decile == 1);
    for (const auto& m : r.corpus.messages) CHECK(m.user_id != "user10");

    // Two users tied for the top count: "user10" < "user9" lexicographically, so user10 goes.
    ms.push_back(testing::message("extra", "user9", "x"));
    r = corpus::filter_corpus(ms, ps);
    CHECK(r.report.users_top_decile == 1);
    bool has9 = false;
    for (const auto& m : r.corpus.messages) {
        CHECK(m.user_id != "user10");
        has9 = has9 || m.user_id == "user9";
    }
    CHECK(has9);
}

TEST_CASE("non-English share above ten percent removes the user") {
    std::vector<corpus::Message> ms;
    for (int k = 0; k < 100; ++k) ms.push_back(testing::message("m" + std::to_string(k), "es_user", "x", k < 12 ? "es" : "en"));
    for (int k = 0; k < 100; ++k) ms.push_back(testing::message("n" + std::to_string(k), "ok_user", "x", k < 10 ? "es" : "en"));
    corpus::FilterConfig cfg;
    cfg.top_user_fraction = 0.0;
    const auto r = corpus::filter_corpus(ms, {testing::profile("es_user"), testing::profile("ok_user")}, cfg);
    CHECK(r.report.non_english == 100);
    for (const auto& m : r.corpus.messages) CHECK(m.user_id == "ok_user");
}

TEST_CASE("message without profile is a data error") {
    const std::vector<corpus::Message> ms{testing::message("1", "ghost", "x")};
    CHECK_THROWS_AS(corpus::filter_corpus(ms, {}), DataError);
}

TEST_CASE("timelines aggregate tokens per user") {
    corpus::FilteredCorpus fc;
    fc.messages = {testing::message("1", "b", "a b"), testing::message("2", "b", "b c"),
                   testing::message("3", "a", "z"), testing::message("4", "c", "q")};
    fc.profiles = {testing::profile("a"), testing::profile("b"), testing::profile("c"), testing::profile("d")};
    const auto tl = corpus::build_timelines(fc);
    REQUIRE(tl.size() == 3);
    CHECK(tl[0].user_id == "a");
    CHECK(tl[1].user_id == "b");
    CHECK(tl[2].user_id == "c");
    CHECK(tl[1].token_counts == corpus::TokenCounts{{"a", 1}, {"b", 2}, {"c", 1}});
    CHECK(tl[1].total_tokens == 4);
    for (const auto& t : tl) {
        std::int64_t total = 0;
        for (const auto& m : t.messages) total += static_cast<std::int64_t>(corpus::tokenize(m.text).size());
        CHECK(total == t.total_tokens);
    }
}

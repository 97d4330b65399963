#include "fixtures.hpp"

#include <cmath>
#include <cstdio>

#include "geolex/stats.hpp"

namespace geolex::testing {

corpus::Message message(std::string id, std::string user, std::string text, std::string lang) {
    corpus::Message m;
    m.message_id = std::move(id);
    m.user_id = std::move(user);
    m.text = std::move(text);
    m.lang_tag = std::move(lang);
    return m;
}

corpus::UserProfile profile(std::string id, std::string name, std::int64_t followers, std::int64_t followees,
                            std::int64_t statuses) {
    corpus::UserProfile p;
    p.user_id = std::move(id);
    p.display_name = std::move(name);
    p.followers = followers;
    p.followees = followees;
    p.statuses_total = statuses;
    return p;
}

FilterFixture filter_fixture() {
    FilterFixture f;
    int next = 1;
    auto add = [&](const std::string& user, const std::string& text, const std::string& lang = "en") {
        char id[8];
        std::snprintf(id, sizeof id, "f%02d", next++);
        f.messages.push_back(message(id, user, text, lang));
        return f.messages.size() - 1;
    };
    // Message-level violators, one each, owned by otherwise ordinary users.
    f.messages[add("u1", "shared this")].is_retweet = true;
    f.survivors.insert(f.messages[add("u1", "good morning")].message_id);
    add("u2", "RT @bob: big news");
    f.survivors.insert(f.messages[add("u2", "lunch time")].message_id);
    f.messages[add("u3", "look at this")].has_url = true;
    f.survivors.insert(f.messages[add("u3", "nice day")].message_id);
    // An unknown language tag counts as English.
    f.survivors.insert(f.messages[add("u4", "hmm okay", "")].message_id);
    f.survivors.insert(f.messages[add("u4", "see you")].message_id);
    for (const char* u : {"u5", "u6", "u7", "u8"}) {
        f.survivors.insert(f.messages[add(u, "first post")].message_id);
        f.survivors.insert(f.messages[add(u, "second post")].message_id);
    }
    // Profile caps: followers, followees, statuses.
    add("vfollowers", "famous one");
    add("vfollowers", "famous two");
    add("vfollowees", "follows everyone");
    add("vstatuses", "posts a lot");
    // Top decile: after the caps ten users remain, so ceil(0.1 * 10) = 1 user
    // with the largest count goes.
    for (int i = 0; i < 6; ++i) add("wheavy", "again and again");
    // Non-English share 2/4 > 10%.
    add("xspanish", "hola amigos", "es");
    add("xspanish", "buenas noches", "es");
    add("xspanish", "hello", "en");
    add("xspanish", "bye", "en");

    for (const char* u : {"u1", "u2", "u3", "u4", "u5", "u6", "u7", "u8", "wheavy", "xspanish"}) {
        f.profiles.push_back(profile(u));
    }
    f.profiles.push_back(profile("vfollowers", "Famous Person", 1500));
    f.profiles.push_back(profile("vfollowees", "Follow Back", 10, 2000));
    f.profiles.push_back(profile("vstatuses", "Busy Poster", 10, 10, 6000));

    f.expected.input_count = 30;
    f.expected.retweet = 2;
    f.expected.url = 1;
    f.expected.follower_cap = 3;
    f.expected.status_cap = 1;
    f.expected.top_decile = 6;
    f.expected.non_english = 4;
    f.expected.output_count = 13;
    f.expected.users_follower_cap = 2;
    f.expected.users_status_cap = 1;
    f.expected.users_top_decile = 1;
    f.expected.users_non_english = 1;
    return f;
}

std::vector<geo::Vertex> square(double x0, double y0, double x1, double y1) {
    return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}};
}

geo::County county(std::string id, std::string msa, std::int64_t population, double x0, double y0, double x1,
                   double y1) {
    geo::County c;
    c.county_id = std::move(id);
    c.msa_id = std::move(msa);
    c.name = c.county_id;
    c.population = population;
    c.rings.push_back(square(x0, y0, x1, y1));
    c.min_x = x0;
    c.min_y = y0;
    c.max_x = x1;
    c.max_y = y1;
    return c;
}

EmWorld em_world(double phi_alpha) {
    EmWorld w;
    const auto& bins = w.bins;
    const std::size_t cells = bins.size() * 2;
    for (std::size_t c = 0; c < cells; ++c) {
        const auto& bin = bins[c / 2];
        const auto sex = c % 2 == 0 ? demographics::Sex::female : demographics::Sex::male;
        for (int k = 0; k < 3; ++k) {
            const std::string name = "n" + std::to_string(c) + "_" + std::to_string(k);
            for (int age = 0; age <= demographics::kMaxAge; ++age) {
                const bool inside = age >= bin.lo && age <= bin.hi;
                w.nd.add(name, sex, 2015 - age, inside ? 400 + 50 * k : 4);
            }
        }
    }
    for (const char* name : {"shared_a", "shared_b"}) {
        for (int age = 0; age <= demographics::kMaxAge; ++age) {
            w.nd.add(name, demographics::Sex::female, 2015 - age, 100);
            w.nd.add(name, demographics::Sex::male, 2015 - age, 100);
        }
    }
    auto& t = w.truth;
    t.bins = bins;
    t.joint_gender = true;
    const auto phi = demographics::build_phi(w.nd, bins, true, phi_alpha);
    t.names = phi.names;
    t.phi = phi.phi;
    t.pi = {0.2, 0.35, 0.25, 0.2};
    for (int j = 0; j < 50; ++j) {
        char buf[8];
        std::snprintf(buf, sizeof buf, "w%02d", j);
        t.vocabulary.emplace_back(buf);
    }
    t.theta.assign(cells, std::vector<double>(50, 0.52 / 50.0));
    for (std::size_t c = 0; c < cells; ++c) {
        for (std::size_t j = 0; j < 6; ++j) t.theta[c][c * 6 + j] += 0.08;
    }
    return w;
}

std::vector<geoloc::LabeledUser> geoloc_world(std::size_t classes, std::size_t users_per_class,
                                              std::size_t tokens_per_user, std::uint64_t seed) {
    constexpr std::size_t kBackground = 200;
    constexpr std::size_t kMarkers = 5;
    std::vector<std::string> words;
    for (std::size_t j = 0; j < kBackground; ++j) words.push_back("bg" + std::to_string(j));
    for (std::size_t k = 0; k < classes; ++k) {
        for (std::size_t j = 0; j < kMarkers; ++j) words.push_back("mk" + std::to_string(k) + "_" + std::to_string(j));
    }
    stats::RngStream rng(seed, 0);
    std::vector<geoloc::LabeledUser> users;
    for (std::size_t k = 0; k < classes; ++k) {
        std::vector<double> weights(words.size(), 1.0);
        for (std::size_t j = 0; j < kMarkers; ++j) weights[kBackground + k * kMarkers + j] = 10.0;
        char msa[24];
        std::snprintf(msa, sizeof msa, "M%02zu", k);
        for (std::size_t u = 0; u < users_per_class; ++u) {
            geoloc::LabeledUser user;
            char id[48];
            std::snprintf(id, sizeof id, "g%02zu_%04zu", k, u);
            user.user_id = id;
            user.msa_id = msa;
            user.messages = static_cast<std::int64_t>(1 + u % 30);
            for (std::size_t t = 0; t < tokens_per_user; ++t) ++user.token_counts[words[rng.categorical(weights)]];
            users.push_back(std::move(user));
        }
    }
    return users;
}

}  // namespace geolex::testing

#include "geolex/demo.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "geolex/corpus.hpp"
#include "geolex/csv.hpp"
#include "geolex/error.hpp"
#include "geolex/stats.hpp"

namespace geolex::demo {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct MsaSpec {
    const char* city;
    const char* state;
    const char* team;
};

constexpr std::array<MsaSpec, 10> kMsas{{
    {"Alderton", "WA", "otters"},
    {"Birchfield", "OR", "beavers"},
    {"Cedarville", "CA", "condors"},
    {"Dunmore", "NV", "coyotes"},
    {"Elmhurst", "AZ", "scorpions"},
    {"Foxboro", "UT", "falcons"},
    {"Glenrock", "CO", "bison"},
    {"Harborview", "NM", "herons"},
    {"Ironwood", "TX", "longhorns"},
    {"Juniper", "OK", "jackrabbits"},
}};

// Two MSAs share a bare city name, which no location field resolves alone.
constexpr const char* kSharedCity = "Springfield";
constexpr int kSharedA = 2;
constexpr int kSharedB = 6;

struct NameSpec {
    const char* name;
    char sex;
    double peak_year;
    double spread;
    double scale;
};

// Birth-year profiles: young, middle-aged and older names per sex, plus two
// names given to both sexes.
constexpr std::array<NameSpec, 30> kNames{{
    {"madison", 'F', 2002, 6, 9000},   {"emma", 'F', 2008, 6, 9000},      {"chloe", 'F', 2004, 7, 7000},
    {"ava", 'F', 2009, 5, 8000},       {"jennifer", 'F', 1976, 7, 9000},  {"jessica", 'F', 1988, 6, 9000},
    {"amanda", 'F', 1985, 6, 7000},    {"sarah", 'F', 1983, 12, 6000},    {"linda", 'F', 1950, 8, 9000},
    {"barbara", 'F', 1940, 10, 8000},  {"carol", 'F', 1945, 9, 6000},     {"susan", 'F', 1957, 8, 8000},
    {"aiden", 'M', 2007, 5, 9000},     {"jayden", 'M', 2008, 5, 8000},    {"logan", 'M', 2004, 7, 7000},
    {"mason", 'M', 2010, 5, 8000},     {"michael", 'M', 1975, 15, 9000},  {"joshua", 'M', 1986, 7, 8000},
    {"matthew", 'M', 1988, 8, 7000},   {"jason", 'M', 1976, 6, 8000},     {"robert", 'M', 1945, 12, 9000},
    {"richard", 'M', 1948, 10, 8000},  {"gary", 'M', 1955, 7, 7000},      {"larry", 'M', 1950, 8, 6000},
    {"jordan", 'F', 1995, 6, 2500},    {"jordan", 'M', 1994, 6, 6000},    {"taylor", 'F', 1993, 6, 6000},
    {"taylor", 'M', 1992, 6, 2000},    {"dorothy", 'F', 1925, 8, 9000},   {"walter", 'M', 1925, 10, 7000},
}};

constexpr std::array<const char*, 12> kSurnames{"smith", "johnson", "garcia", "miller", "davis", "lopez",
                                                "wilson", "moore", "clark", "lewis",  "walker", "young"};

constexpr std::array<const char*, 96> kCommon{
    "the",   "a",     "to",    "and",   "i",     "you",    "it",    "is",    "in",    "my",    "of",    "for",
    "this",  "that",  "me",    "on",    "so",    "with",   "just",  "be",    "was",   "have",  "but",  "all",
    "not",   "are",   "at",    "we",    "like",  "get",    "your",  "day",   "what",  "now",   "up",    "love",
    "do",    "out",   "can",   "go",    "good",  "know",   "when",  "about", "time",  "if",    "one",  "today",
    "got",   "no",    "how",   "going", "see",   "new",    "people", "back", "night", "want",  "too",  "really",
    "think", "still", "home",  "work",  "much",  "here",   "need",  "happy", "more",  "well",  "right", "make",
    "week",  "again", "come",  "last",  "great", "first",  "off",   "morning", "food", "game", "weekend", "friends",
    "coffee", "rain", "sun",   "drive", "traffic", "city", "park",  "music", "show",  "movie", "dinner", "school"};

constexpr std::array<std::array<const char*, 6>, 4> kAgeMarkers{{
    {"homework", "mom", "bestie", "recess", "crush", "bae"},
    {"lit", "finals", "roommate", "squad", "turnt", "dorm"},
    {"toddler", "mortgage", "daycare", "promotion", "commute", "wedding"},
    {"grandkids", "retirement", "garden", "church", "grandson", "pension"},
}};

constexpr std::array<std::array<const char*, 5>, 2> kGenderMarkers{{
    {"nails", "cute", "dress", "hubby", "shopping"},
    {"bro", "beer", "fantasy", "golf", "wife"},
}};

constexpr std::array<const char*, 8> kOnsets{"b", "ch", "d", "g", "k", "sk", "tr", "y"};
constexpr std::array<const char*, 6> kNuclei{"a", "ee", "i", "o", "oo", "u"};
constexpr std::array<const char*, 6> kCodas{"nz", "k", "b", "ll", "t", "sh"};

constexpr std::array<const char*, 6> kSpanish{"hola", "gracias", "amigo", "fiesta", "bueno", "noche"};

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string capital(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

/// Slang-like regional words, distinct across MSAs.
std::vector<std::string> slang_words(int msa) {
    std::vector<std::string> out;
    for (int k = 0; k < 5; ++k) {
        const auto o = static_cast<std::size_t>((msa * 3 + k) % static_cast<int>(kOnsets.size()));
        const auto n = static_cast<std::size_t>((msa + k * 5) % static_cast<int>(kNuclei.size()));
        const auto c = static_cast<std::size_t>((msa * 2 + k) % static_cast<int>(kCodas.size()));
        out.push_back(std::string(kOnsets[o]) + kNuclei[n] + kCodas[c] + std::to_string(msa) + "z");
    }
    return out;
}

std::vector<std::string> entity_words(int msa) {
    const std::string city = lower(kMsas[static_cast<std::size_t>(msa)].city);
    return {city, city + "fest", "#go" + std::string(kMsas[static_cast<std::size_t>(msa)].team), city + "mall",
            std::string(kMsas[static_cast<std::size_t>(msa)].team)};
}

double normal(stats::RngStream& rng) {
    const double u1 = std::max(rng.uniform01(), 1e-300);
    const double u2 = rng.uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

std::int64_t name_count(const NameSpec& n, int year) {
    const double z = (year - n.peak_year) / n.spread;
    return static_cast<std::int64_t>(std::llround(n.scale * std::exp(-0.5 * z * z))) + 5;
}

std::string county_id(int msa, int j) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "C%02d%d", msa + 1, j + 1);
    return buf;
}

std::string msa_id(int msa) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "M%02d", msa + 1);
    return buf;
}

std::int64_t county_population(int msa, int j) {
    static constexpr std::array<std::int64_t, 3> base{520000, 260000, 90000};
    return base[static_cast<std::size_t>(j)] + 17000 * msa;
}

// County j of MSA i covers lon [-120 + 4i + j, -119 + 4i + j], lat [35, 36].
double county_lon0(int msa, int j) { return -120.0 + 4.0 * msa + j; }

}  // namespace

DemoSummary write_demo_world(const std::string& dir, const DemoOptions& o) {
    if (o.msas < 2 || o.msas > static_cast<int>(kMsas.size())) {
        throw ValidationError("demo world supports 2 to 10 MSAs");
    }
    if (o.users_per_msa < 10) throw ValidationError("demo world needs at least 10 users per MSA");
    const fs::path root(dir);
    fs::create_directories(root / "names");
    DemoSummary summary;

    // Counties.
    json features = json::array();
    for (int i = 0; i < o.msas; ++i) {
        for (int j = 0; j < 3; ++j) {
            const double x0 = county_lon0(i, j);
            json f;
            f["type"] = "Feature";
            f["properties"] = {{"county_id", county_id(i, j)},
                               {"msa_id", msa_id(i)},
                               {"msa_name", std::string(kMsas[static_cast<std::size_t>(i)].city) + " metro"},
                               {"name", std::string(kMsas[static_cast<std::size_t>(i)].city) + " county " +
                                            std::to_string(j + 1)},
                               {"population", county_population(i, j)}};
            f["geometry"] = {{"type", "Polygon"},
                             {"coordinates",
                              json::array({json::array({json::array({x0, 35.0}), json::array({x0 + 1.0, 35.0}),
                                                        json::array({x0 + 1.0, 36.0}), json::array({x0, 36.0}),
                                                        json::array({x0, 35.0})})})}};
            features.push_back(std::move(f));
            ++summary.counties;
        }
    }
    csv::write_file((root / "counties.geojson").string(),
                    json{{"type", "FeatureCollection"}, {"features", features}}.dump(1) + "\n");

    // Gazetteer.
    std::string gaz = "city,state_code,msa_id\n";
    for (int i = 0; i < o.msas; ++i) {
        const auto& m = kMsas[static_cast<std::size_t>(i)];
        gaz += csv::join({m.city, m.state, msa_id(i)}) + "\n";
        if (i == kSharedA || i == kSharedB) gaz += csv::join({kSharedCity, m.state, msa_id(i)}) + "\n";
    }
    csv::write_file((root / "gazetteer.csv").string(), gaz);

    // Birth-name tables, one file per year of birth covering ages 0-95.
    for (int year = o.collection_year - 95; year <= o.collection_year; ++year) {
        std::string t = "name,sex,count\n";
        for (const auto& n : kNames) {
            t += csv::join({capital(n.name), std::string(1, n.sex), std::to_string(name_count(n, year))}) + "\n";
        }
        csv::write_file((root / "names" / ("yob" + std::to_string(year) + ".txt")).string(), t);
        ++summary.name_files;
    }

    // Lexicon.
    std::string lex = "term,label\n";
    for (int i = 0; i < o.msas; ++i) {
        for (const auto& w : slang_words(i)) lex += csv::join({w, "Nonstandard-Word"}) + "\n";
        for (const auto& w : entity_words(i)) lex += csv::join({w, "Entity-Name"}) + "\n";
    }
    for (const char* w : {"coffee", "traffic", "rain"}) lex += csv::join({w, "Other"}) + "\n";
    csv::write_file((root / "lexicon.csv").string(), lex);

    // Users and messages.
    stats::RngStream rng(o.seed, stats::fnv1a64("demo-world"));
    const std::array<double, 4> bin_prior{0.15, 0.40, 0.25, 0.20};
    const std::array<std::pair<int, int>, 4> bin_ages{{{13, 17}, {18, 29}, {30, 39}, {40, 75}}};
    std::vector<double> common_w(kCommon.size());
    for (std::size_t k = 0; k < common_w.size(); ++k) common_w[k] = 1.0 / (1.0 + static_cast<double>(k));

    std::ostringstream corpus;
    std::int64_t next_message = 1;
    int next_user = 1;
    const std::int64_t t0 = 1388534400;  // 2014-01-01T00:00:00Z
    for (int i = 0; i < o.msas; ++i) {
        const auto slang = slang_words(i);
        const auto ents = entity_words(i);
        const auto& spec = kMsas[static_cast<std::size_t>(i)];
        const std::vector<double> county_w{static_cast<double>(county_population(i, 0)),
                                           static_cast<double>(county_population(i, 1)),
                                           static_cast<double>(county_population(i, 2))};
        for (int u = 0; u < o.users_per_msa; ++u, ++next_user) {
            char uid[16];
            std::snprintf(uid, sizeof uid, "u%05d", next_user);
            const std::size_t bin = rng.categorical(bin_prior);
            const int sex = rng.uniform01() < 0.5 ? 0 : 1;  // 0 = F
            const auto [alo, ahi] = bin_ages[bin];
            const int age = alo + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(ahi - alo + 1)));
            const int birth = o.collection_year - age;

            std::vector<double> nw(kNames.size(), 0.0);
            for (std::size_t k = 0; k < kNames.size(); ++k) {
                if ((kNames[k].sex == 'F') == (sex == 0)) nw[k] = static_cast<double>(name_count(kNames[k], birth));
            }
            std::string first = capital(kNames[rng.categorical(nw)].name);
            const double name_roll = rng.uniform01();
            if (name_roll < 0.03) first = "Xx" + std::to_string(next_user) + "xx";
            else if (name_roll < 0.05) first = "Official";
            corpus::UserProfile prof;
            prof.user_id = uid;
            prof.display_name = first + " " + capital(kSurnames[rng.uniform_index(kSurnames.size())]);

            const double loc_roll = rng.uniform01();
            const bool shared = i == kSharedA || i == kSharedB;
            if (loc_roll < 0.62) {
                prof.location_field = std::string(spec.city) + ", " + spec.state;
            } else if (loc_roll < 0.72) {
                prof.location_field = shared ? std::string(kSharedCity) : std::string(spec.city);
            } else if (loc_roll < 0.80) {
                prof.location_field = shared ? std::string(kSharedCity) + ", " + spec.state : "somewhere nice";
            } else if (loc_roll < 0.88) {
                prof.location_field = "";
            }
            const double kind = rng.uniform01();
            prof.followers = static_cast<std::int64_t>(20 + rng.uniform_index(800));
            prof.followees = static_cast<std::int64_t>(20 + rng.uniform_index(800));
            prof.statuses_total = static_cast<std::int64_t>(100 + rng.uniform_index(3500));
            if (kind < 0.03) prof.followers = 25000;
            else if (kind < 0.05) prof.statuses_total = 12000;
            const bool spanish = kind >= 0.05 && kind < 0.08;
            const bool gps_user = rng.uniform01() < 0.72;
            const std::size_t home = rng.categorical(county_w);

            const double ln = std::log(o.mean_messages) - 0.32 + 0.8 * normal(rng);
            const int n_msgs = std::clamp(static_cast<int>(std::lround(std::exp(ln))), 2, 400);
            for (int k = 0; k < n_msgs; ++k, ++next_message) {
                corpus::Message m;
                char mid[24];
                std::snprintf(mid, sizeof mid, "m%07lld", static_cast<long long>(next_message));
                m.message_id = mid;
                m.user_id = uid;
                m.timestamp = t0 + static_cast<std::int64_t>(rng.uniform_index(365 * 86400));
                m.lang_tag = "en";
                std::vector<std::string> words;
                const bool in_spanish = spanish && rng.uniform01() < 0.6;
                const int len = 7 + static_cast<int>(rng.uniform_index(8));
                for (int w = 0; w < len; ++w) {
                    const double r = rng.uniform01();
                    if (in_spanish) {
                        words.emplace_back(kSpanish[rng.uniform_index(kSpanish.size())]);
                    } else if (r < 0.05) {
                        words.push_back(slang[rng.uniform_index(slang.size())]);
                    } else if (r < 0.08) {
                        words.push_back(ents[rng.uniform_index(ents.size())]);
                    } else if (r < 0.14) {
                        words.emplace_back(kAgeMarkers[bin][rng.uniform_index(kAgeMarkers[bin].size())]);
                    } else if (r < 0.18) {
                        const auto& g = kGenderMarkers[static_cast<std::size_t>(sex)];
                        words.emplace_back(g[rng.uniform_index(g.size())]);
                    } else if (r < 0.19) {
                        words.emplace_back("@friend" + std::to_string(rng.uniform_index(50)));
                    } else {
                        words.emplace_back(kCommon[rng.categorical(common_w)]);
                    }
                }
                if (in_spanish) m.lang_tag = "es";
                const double special = rng.uniform01();
                if (special < 0.04) {
                    m.is_retweet = true;
                    words.insert(words.begin(), "RT @news" + std::to_string(rng.uniform_index(9)) + ":");
                } else if (special < 0.08) {
                    m.has_url = true;
                    words.push_back("http://t.co/" + std::to_string(rng.uniform_index(100000)));
                }
                std::string text;
                for (std::size_t w = 0; w < words.size(); ++w) {
                    if (w) text += ' ';
                    text += words[w];
                }
                if (!words.empty() && rng.uniform01() < 0.3) text += "!";
                m.text = std::move(text);
                if (gps_user && rng.uniform01() < 0.85) {
                    const std::size_t c = rng.uniform01() < 0.9 ? home : rng.categorical(county_w);
                    const double x0 = county_lon0(i, static_cast<int>(c));
                    m.geo = corpus::GeoPoint{35.02 + 0.96 * rng.uniform01(), x0 + 0.02 + 0.96 * rng.uniform01()};
                }
                corpus << corpus::to_json_line(m, prof) << '\n';
                ++summary.messages;
            }
            ++summary.users;
        }
    }
    csv::write_file((root / "corpus.jsonl").string(), corpus.str());

    // Config with paths relative to the config file.
    std::ostringstream cfg;
    cfg << "# geolex demo configuration\n"
        << "seed = " << o.seed << "\n"
        << "out_dir = \"out\"\n\n"
        << "[inputs]\n"
        << "corpus = \"corpus.jsonl\"\n"
        << "counties = \"counties.geojson\"\n"
        << "gazetteer = \"gazetteer.csv\"\n"
        << "names = \"names\"\n"
        << "lexicons = [\"lexicon.csv\"]\n\n"
        << "[filter]\n"
        << "max_followers = 1000\n"
        << "max_followees = 1000\n"
        << "max_statuses = 5000\n"
        << "top_user_fraction = 0.10\n"
        << "max_non_english_fraction = 0.10\n\n"
        << "[sampling]\n"
        << "schemes = [\"gps_msa\", \"gps_county\", \"loc_msa\"]\n"
        << "messages_per_msa = 400\n"
        << "users_per_msa = 40\n"
        << "allow_short = true\n\n"
        << "[demographics]\n"
        << "collection_year = " << o.collection_year << "\n"
        << "age_bins = [[0, 17], [18, 29], [30, 39], [40, 95]]\n"
        << "rare_name_ratio = 100.0\n\n"
        << "[lexvar]\n"
        << "lambda = 3.0\n"
        << "top_k = 25\n\n"
        << "[geoloc]\n"
        << "folds = 5\n"
        << "lambda_grid = [0.1, 1.0, 10.0]\n\n"
        << "[bootstrap]\n"
        << "resamples = 1000\n"
        << "level = 0.95\n\n"
        << "[report]\n"
        << "formats = [\"csv\", \"md\", \"svg\"]\n"
        << "svg_timestamp = true\n";
    csv::write_file((root / "geolex.toml").string(), cfg.str());
    return summary;
}

}  // namespace geolex::demo

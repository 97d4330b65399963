#include "geolex/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "geolex/error.hpp"
#include "geolex/text.hpp"

namespace geolex::corpus {

using nlohmann::json;

bool valid_point(const GeoPoint& p) noexcept {
    return p.lat >= -90.0 && p.lat <= 90.0 && p.lon >= -180.0 && p.lon <= 180.0;
}

namespace {

constexpr std::size_t kMaxSampleLines = 20;

std::string id_string(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    throw std::invalid_argument("id must be string or integer");
}

std::int64_t count_field(const json& user, const char* key) {
    if (!user.contains(key) || user[key].is_null()) return 0;
    const auto v = user[key].get<std::int64_t>();
    if (v < 0) throw std::invalid_argument(std::string(key) + " is negative");
    return v;
}

std::optional<GeoPoint> parse_coordinates(const json& rec) {
    if (!rec.contains("coordinates") || rec["coordinates"].is_null()) return std::nullopt;
    const json* arr = &rec["coordinates"];
    if (arr->is_object()) {
        if (!arr->contains("coordinates")) throw std::invalid_argument("Point without coordinates");
        arr = &(*arr)["coordinates"];
    }
    if (!arr->is_array() || arr->size() != 2) throw std::invalid_argument("coordinates must be [lon, lat]");
    GeoPoint p{(*arr)[1].get<double>(), (*arr)[0].get<double>()};
    if (!valid_point(p)) throw std::invalid_argument("coordinates out of range");
    return p;
}

bool text_has_url(std::string_view text) {
    return text.find("http://") != std::string_view::npos ||
           text.find("https://") != std::string_view::npos;
}

struct ProfileSlot {
    UserProfile profile;
    std::int64_t timestamp = 0;
    std::string message_id;
};

}  // namespace

ParsedCorpus parse_messages(std::istream& in) {
    if (!in.good()) throw IoError("corpus stream is not readable");
    ParsedCorpus out;
    std::unordered_map<std::string, ProfileSlot> profiles;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json rec = json::parse(line);
            if (!rec.is_object()) throw std::invalid_argument("record is not an object");
            const json& user = rec.at("user");
            Message m;
            m.message_id = rec.contains("id") ? id_string(rec["id"]) : std::to_string(line_no);
            m.user_id = id_string(user.at("id"));
            m.text = rec.at("text").get<std::string>();
            if (text::trim(m.text).empty()) throw std::invalid_argument("empty text");
            if (rec.contains("lang") && rec["lang"].is_string()) {
                m.lang_tag = rec["lang"].get<std::string>();
                if (m.lang_tag == "und") m.lang_tag.clear();
            }
            if (rec.contains("timestamp") && !rec["timestamp"].is_null())
                m.timestamp = rec["timestamp"].get<std::int64_t>();
            m.geo = parse_coordinates(rec);
            m.is_retweet = (rec.contains("retweeted_status") && !rec["retweeted_status"].is_null()) ||
                           has_rt_marker(m.text);
            bool urls = false;
            if (rec.contains("entities") && rec["entities"].is_object() &&
                rec["entities"].contains("urls")) {
                const auto& u = rec["entities"]["urls"];
                urls = u.is_array() && !u.empty();
            }
            m.has_url = urls || text_has_url(m.text);

            UserProfile p;
            p.user_id = m.user_id;
            if (user.contains("name") && user["name"].is_string()) p.display_name = user["name"];
            if (user.contains("location") && user["location"].is_string())
                p.location_field = user["location"].get<std::string>();
            p.followers = count_field(user, "followers_count");
            p.followees = count_field(user, "friends_count");
            p.statuses_total = count_field(user, "statuses_count");

            auto it = profiles.find(m.user_id);
            if (it == profiles.end()) {
                profiles.emplace(m.user_id, ProfileSlot{std::move(p), m.timestamp, m.message_id});
            } else if (std::tie(m.timestamp, m.message_id) >
                       std::tie(it->second.timestamp, it->second.message_id)) {
                it->second = ProfileSlot{std::move(p), m.timestamp, m.message_id};
            }
            out.messages.push_back(std::move(m));
        } catch (const std::exception&) {
            ++out.errors.count;
            if (out.errors.sample_lines.size() < kMaxSampleLines) out.errors.sample_lines.push_back(line_no);
        }
    }
    if (in.bad()) throw IoError("read error on corpus stream");
    if (out.messages.empty())
        throw DataError("corpus contains no parseable records (" + std::to_string(out.errors.count) +
                        " malformed lines)");
    out.profiles.reserve(profiles.size());
    for (auto& [id, slot] : profiles) out.profiles.push_back(std::move(slot.profile));
    std::sort(out.profiles.begin(), out.profiles.end(),
              [](const UserProfile& a, const UserProfile& b) { return a.user_id < b.user_id; });
    return out;
}

ParsedCorpus parse_messages_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus file: " + path);
    return parse_messages(in);
}

std::string to_json_line(const Message& m, const UserProfile& profile) {
    json rec;
    rec["id"] = m.message_id;
    rec["text"] = m.text;
    rec["lang"] = m.lang_tag.empty() ? json("und") : json(m.lang_tag);
    rec["timestamp"] = m.timestamp;
    if (m.geo) {
        rec["coordinates"] = json::array({m.geo->lon, m.geo->lat});
    } else {
        rec["coordinates"] = nullptr;
    }
    if (m.is_retweet) rec["retweeted_status"] = json::object();
    rec["entities"]["urls"] = m.has_url ? json::array({json::object()}) : json::array();
    json user;
    user["id"] = profile.user_id;
    user["name"] = profile.display_name;
    user["location"] = profile.location_field ? json(*profile.location_field) : json(nullptr);
    user["followers_count"] = profile.followers;
    user["friends_count"] = profile.followees;
    user["statuses_count"] = profile.statuses_total;
    rec["user"] = std::move(user);
    return rec.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::vector<std::string> tokenize(std::string_view raw) {
    std::vector<std::string> tokens;
    for (const auto& piece : text::split_whitespace(raw)) {
        auto cps = text::decode_utf8(piece);
        for (auto& c : cps) {
            c = text::to_lower(c);
            if (c == U'\u2019') c = U'\'';
        }
        std::size_t b = 0;
        while (b < cps.size() && text::is_punct(cps[b]) && cps[b] != U'#' && cps[b] != U'@') ++b;
        if (b < cps.size() && cps[b] == U'@') continue;
        std::size_t e = cps.size();
        while (e > b && text::is_punct(cps[e - 1])) --e;
        if (e == b) continue;
        tokens.push_back(text::encode_utf8(std::u32string_view(cps).substr(b, e - b)));
    }
    return tokens;
}

bool has_rt_marker(std::string_view raw) {
    const auto pieces = text::split_whitespace(raw);
    if (pieces.empty()) return false;
    return text::lowercase(text::strip_trailing_punct(pieces.front())) == "rt";
}

FilterResult filter_corpus(const std::vector<Message>& messages,
                           const std::vector<UserProfile>& profiles,
                           const FilterConfig& config) {
    std::unordered_map<std::string, const UserProfile*> by_user;
    for (const auto& p : profiles) by_user.emplace(p.user_id, &p);

    FilterResult result;
    FilterReport& report = result.report;
    report.input_count = messages.size();

    // Message-level rules.
    std::vector<const Message*> alive;
    alive.reserve(messages.size());
    for (const auto& m : messages) {
        if (!by_user.count(m.user_id))
            throw DataError("message " + m.message_id + " references unknown user " + m.user_id);
        if (m.is_retweet || has_rt_marker(m.text)) {
            ++report.retweet;
        } else if (m.has_url) {
            ++report.url;
        } else {
            alive.push_back(&m);
        }
    }

    // Applies a user-level predicate to the surviving messages.
    auto drop_users = [&alive](const std::unordered_set<std::string>& users, std::size_t& msg_count,
                               std::size_t& user_count) {
        user_count += users.size();
        std::vector<const Message*> kept;
        kept.reserve(alive.size());
        for (const auto* m : alive) {
            if (users.count(m->user_id)) {
                ++msg_count;
            } else {
                kept.push_back(m);
            }
        }
        alive.swap(kept);
    };
    auto active_users = [&alive] {
        std::map<std::string, std::size_t> counts;
        for (const auto* m : alive) ++counts[m->user_id];
        return counts;
    };

    {
        std::unordered_set<std::string> drop;
        for (const auto& [uid, n] : active_users()) {
            const auto* p = by_user.at(uid);
            if (p->followers > config.max_followers || p->followees > config.max_followees) drop.insert(uid);
        }
        drop_users(drop, report.follower_cap, report.users_follower_cap);
    }
    {
        std::unordered_set<std::string> drop;
        for (const auto& [uid, n] : active_users())
            if (by_user.at(uid)->statuses_total > config.max_statuses) drop.insert(uid);
        drop_users(drop, report.status_cap, report.users_status_cap);
    }
    {
        const auto counts = active_users();
        std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        const auto n_drop = static_cast<std::size_t>(
            std::ceil(config.top_user_fraction * static_cast<double>(ranked.size()) - 1e-9));
        std::unordered_set<std::string> drop;
        for (std::size_t i = 0; i < std::min(n_drop, ranked.size()); ++i) drop.insert(ranked[i].first);
        drop_users(drop, report.top_decile, report.users_top_decile);
    }
    {
        std::map<std::string, std::pair<std::size_t, std::size_t>> lang;  // (non-English, total)
        for (const auto* m : alive) {
            auto& slot = lang[m->user_id];
            ++slot.second;
            if (!m->lang_tag.empty() && m->lang_tag != config.english_tag) ++slot.first;
        }
        std::unordered_set<std::string> drop;
        for (const auto& [uid, c] : lang) {
            const double frac = static_cast<double>(c.first) / static_cast<double>(c.second);
            if (frac > config.max_non_english_fraction) drop.insert(uid);
        }
        drop_users(drop, report.non_english, report.users_non_english);
    }

    std::unordered_set<std::string> surviving;
    result.corpus.messages.reserve(alive.size());
    for (const auto* m : alive) {
        result.corpus.messages.push_back(*m);
        surviving.insert(m->user_id);
    }
    for (const auto& p : profiles)
        if (surviving.count(p.user_id)) result.corpus.profiles.push_back(p);
    std::sort(result.corpus.profiles.begin(), result.corpus.profiles.end(),
              [](const UserProfile& a, const UserProfile& b) { return a.user_id < b.user_id; });
    report.output_count = result.corpus.messages.size();
    return result;
}

std::string filter_report_csv(const FilterReport& r) {
    std::ostringstream os;
    os << "rule,messages_excluded,users_excluded\n";
    os << "retweet," << r.retweet << ",\n";
    os << "url," << r.url << ",\n";
    os << "follower_cap," << r.follower_cap << ',' << r.users_follower_cap << '\n';
    os << "status_cap," << r.status_cap << ',' << r.users_status_cap << '\n';
    os << "top_decile," << r.top_decile << ',' << r.users_top_decile << '\n';
    os << "non_english," << r.non_english << ',' << r.users_non_english << '\n';
    os << "input," << r.input_count << ",\n";
    os << "output," << r.output_count << ",\n";
    return os.str();
}

std::string filter_report_text(const FilterReport& r) {
    std::ostringstream os;
    os << "Filter report\n";
    os << "  input messages:           " << r.input_count << '\n';
    os << "  retweets removed:         " << r.retweet << '\n';
    os << "  URL messages removed:     " << r.url << '\n';
    os << "  follower/followee cap:    " << r.follower_cap << " messages, " << r.users_follower_cap
       << " users\n";
    os << "  status-count cap:         " << r.status_cap << " messages, " << r.users_status_cap << " users\n";
    os << "  most active users:        " << r.top_decile << " messages, " << r.users_top_decile << " users\n";
    os << "  non-English users:        " << r.non_english << " messages, " << r.users_non_english
       << " users\n";
    os << "  output messages:          " << r.output_count << '\n';
    return os.str();
}

TokenCounts count_tokens(const std::vector<Message>& messages) {
    TokenCounts counts;
    for (const auto& m : messages)
        for (auto& tok : tokenize(m.text)) ++counts[std::move(tok)];
    return counts;
}

std::vector<UserTimeline> build_timelines(const FilteredCorpus& corpus) {
    std::map<std::string, UserTimeline> by_user;
    for (const auto& m : corpus.messages) {
        auto& tl = by_user[m.user_id];
        tl.user_id = m.user_id;
        tl.messages.push_back(m);
    }
    for (const auto& p : corpus.profiles) {
        auto it = by_user.find(p.user_id);
        if (it != by_user.end()) it->second.profile = p;
    }
    std::vector<UserTimeline> out;
    out.reserve(by_user.size());
    for (auto& [uid, tl] : by_user) {
        std::sort(tl.messages.begin(), tl.messages.end(), [](const Message& a, const Message& b) {
            return std::tie(a.timestamp, a.message_id) < std::tie(b.timestamp, b.message_id);
        });
        tl.token_counts = count_tokens(tl.messages);
        tl.total_tokens = 0;
        for (const auto& [w, c] : tl.token_counts) tl.total_tokens += c;
        if (tl.profile.user_id.empty()) tl.profile.user_id = uid;
        out.push_back(std::move(tl));
    }
    return out;
}

}  // namespace geolex::corpus

#pragma once

// Message ingestion, the spam/automation filter cascade, tokenization and
// per-user timelines.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace geolex::corpus {

struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;

    friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

/// True when lat in [-90, 90] and lon in [-180, 180].
bool valid_point(const GeoPoint& p) noexcept;

struct Message {
    std::string message_id;
    std::string user_id;
    std::string text;
    std::string lang_tag;  // empty = unknown
    std::optional<GeoPoint> geo;
    bool is_retweet = false;
    bool has_url = false;
    std::int64_t timestamp = 0;  // UTC seconds

    friend bool operator==(const Message&, const Message&) = default;
};

struct UserProfile {
    std::string user_id;
    std::string display_name;
    std::optional<std::string> location_field;
    std::int64_t followers = 0;
    std::int64_t followees = 0;
    std::int64_t statuses_total = 0;

    friend bool operator==(const UserProfile&, const UserProfile&) = default;
};

using TokenCounts = std::map<std::string, std::int64_t>;

struct UserTimeline {
    std::string user_id;
    UserProfile profile;
    std::vector<Message> messages;
    TokenCounts token_counts;
    std::int64_t total_tokens = 0;
};

struct ParseErrors {
    std::size_t count = 0;
    /// 1-based line numbers of the first few malformed lines.
    std::vector<std::size_t> sample_lines;
};

struct ParsedCorpus {
    std::vector<Message> messages;
    /// One profile per user, sorted by user_id.
    std::vector<UserProfile> profiles;
    ParseErrors errors;
};

/// Reads newline-delimited JSON records. Malformed lines are counted and
/// skipped. Throws IoError when the stream is unreadable and DataError when
/// no line parses.
///
/// Record fields: id, text, lang, timestamp (seconds, optional), coordinates
/// ([lon, lat], a GeoJSON Point object, or null), retweeted_status (presence
/// marks a retweet), entities.urls (non-empty marks a URL), and user{id, name,
/// location, followers_count, friends_count, statuses_count}. When a user
/// appears on several lines, the profile from the most recent message wins
/// (ties by larger message id).
ParsedCorpus parse_messages(std::istream& in);
ParsedCorpus parse_messages_file(const std::string& path);

/// One JSON line in the ingestion schema (no trailing newline).
std::string to_json_line(const Message& m, const UserProfile& profile);

/// Lowercased tokens split on Unicode whitespace. Leading and trailing
/// punctuation is stripped except a leading '#'; internal apostrophes stay;
/// tokens starting with '@' are dropped; U+2019 is folded to '\''.
std::vector<std::string> tokenize(std::string_view text);

/// First whitespace token, lowercased with trailing punctuation removed,
/// equals "rt".
bool has_rt_marker(std::string_view text);

struct FilterConfig {
    std::int64_t max_followers = 1000;
    std::int64_t max_followees = 1000;
    std::int64_t max_statuses = 5000;
    double top_user_fraction = 0.10;
    double max_non_english_fraction = 0.10;
    std::string english_tag = "en";
};

struct FilterReport {
    std::size_t input_count = 0;
    std::size_t retweet = 0;
    std::size_t url = 0;
    std::size_t follower_cap = 0;
    std::size_t status_cap = 0;
    std::size_t top_decile = 0;
    std::size_t non_english = 0;
    std::size_t output_count = 0;
    /// Users removed by each user-level rule.
    std::size_t users_follower_cap = 0;
    std::size_t users_status_cap = 0;
    std::size_t users_top_decile = 0;
    std::size_t users_non_english = 0;

    std::size_t total_excluded() const noexcept {
        return retweet + url + follower_cap + status_cap + top_decile + non_english;
    }
};

struct FilteredCorpus {
    std::vector<Message> messages;      // input order preserved
    std::vector<UserProfile> profiles;  // surviving users, sorted by user_id
};

struct FilterResult {
    FilteredCorpus corpus;
    FilterReport report;
};

/// Applies, in order: retweets, URL messages, follower/followee cap,
/// status-count cap, the top fraction of users by in-dataset message count
/// (ceil(fraction * N) users, ties by ascending user_id), and users whose
/// non-English share exceeds the cap. User-level rules see the counts left by
/// the rules before them. An unknown lang tag counts as English. Throws
/// DataError when a message has no profile.
FilterResult filter_corpus(const std::vector<Message>& messages,
                           const std::vector<UserProfile>& profiles,
                           const FilterConfig& config = {});

/// CSV (rule,messages_excluded,users_excluded) and a readable summary.
std::string filter_report_csv(const FilterReport& report);
std::string filter_report_text(const FilterReport& report);

TokenCounts count_tokens(const std::vector<Message>& messages);

/// One timeline per user with at least one message, sorted by user_id.
/// Messages within a timeline are ordered by (timestamp, message_id).
std::vector<UserTimeline> build_timelines(const FilteredCorpus& corpus);

}  // namespace geolex::corpus

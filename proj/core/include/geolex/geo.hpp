#pragma once

// County reverse geocoding, profile location-field matching and county-level
// representativeness metrics.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geolex/corpus.hpp"

namespace geolex::geo {

/// Vertex in plate-carree coordinates (x = longitude, y = latitude).
struct Vertex {
    double x = 0.0;
    double y = 0.0;
};

/// Closed ring: first vertex equals last.
using Ring = std::vector<Vertex>;

struct County {
    std::string county_id;
    std::string msa_id;
    std::string name;
    /// Outer rings and holes alike; containment is even-odd over all rings.
    std::vector<Ring> rings;
    std::int64_t population = 0;

    double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;  // bounding box
};

struct Msa {
    std::string msa_id;
    std::string name;
    std::vector<std::string> state_codes;  // uppercase, sorted
    std::vector<std::size_t> counties;      // indices into GeoIndex::counties(), by county_id
};

struct GazetteerEntry {
    std::string city;        // normalized
    std::string state_code;  // uppercase
    std::string msa_id;
};

/// Immutable county/MSA index. Safe for concurrent reads.
class GeoIndex {
public:
    GeoIndex() = default;

    /// Validates closed rings, positive populations and unique county ids.
    /// MSAs are created from the counties' msa_id; gazetteer rows must name
    /// a known MSA. Throws DataError.
    GeoIndex(std::vector<County> counties, std::vector<GazetteerEntry> gazetteer,
             std::map<std::string, std::string> msa_names = {});

    const std::vector<County>& counties() const noexcept { return counties_; }
    const std::vector<Msa>& msas() const noexcept { return msas_; }
    const std::vector<GazetteerEntry>& gazetteer() const noexcept { return gazetteer_; }

    const County* find_county(std::string_view county_id) const;
    const Msa* find_msa(std::string_view msa_id) const;

    /// Gazetteer rows for a normalized city string.
    std::span<const GazetteerEntry> lookup_city(std::string_view normalized_city) const;

private:
    std::vector<County> counties_;  // sorted by county_id
    std::vector<Msa> msas_;         // sorted by msa_id
    std::vector<GazetteerEntry> gazetteer_;  // sorted by (city, state, msa)
};

/// Parses a GeoJSON FeatureCollection of Polygon/MultiPolygon features with
/// properties county_id, msa_id, population (optional: name, msa_name).
std::vector<County> load_counties_geojson(const std::string& path);
std::vector<County> parse_counties_geojson(std::string_view geojson);

/// CSV with header city,state_code,msa_id.
std::vector<GazetteerEntry> load_gazetteer_csv(const std::string& path);
std::vector<GazetteerEntry> parse_gazetteer_csv(std::string_view csv);

GeoIndex load_geo_index(const std::string& counties_geojson, const std::string& gazetteer_csv);

/// True when the point is inside the county under even-odd ray casting, or on
/// one of its edges.
bool county_contains(const County& county, const corpus::GeoPoint& point);

/// County containing the point; a point on a shared edge goes to the lowest
/// county_id. Throws DomainError for invalid coordinates.
std::optional<std::string> reverse_geocode(const corpus::GeoPoint& point, const GeoIndex& index);

/// Trim, collapse whitespace, lowercase, strip trailing punctuation.
std::string normalize_location(std::string_view raw);

/// Matches "city" or "city, ST" exactly against the gazetteer. A bare city
/// name listed under more than one MSA is ambiguous and does not match.
std::optional<std::string> match_location_field(std::string_view raw, const GeoIndex& index);

/// sum |p_c - t_c|. Throws DomainError for mismatched lengths, negative
/// entries, or vectors not summing to 1 within 1e-6.
double l1_distance(std::span<const double> p, std::span<const double> t);

/// A message with its county assignment (empty county = outside all counties).
struct GeocodedMessage {
    std::string message_id;
    std::string user_id;
    std::string county_id;
    std::string msa_id;
};

struct CountyShare {
    std::string county_id;
    double population_share = 0.0;
    double user_share = 0.0;
    double tweet_share = 0.0;
    std::int64_t users = 0;
    std::int64_t tweets = 0;
};

struct MsaRepresentation {
    std::string msa_id;
    std::string msa_name;
    std::vector<CountyShare> counties;  // every county of the MSA, by county_id
    std::int64_t tweets = 0;
    std::int64_t users = 0;
    /// Absent when the MSA has no sampled tweets.
    std::optional<double> l1_population_users;
    std::optional<double> l1_population_tweets;
};

struct RepresentationTable {
    std::vector<MsaRepresentation> msas;  // GeoIndex MSA order
};

/// Per-MSA county shares of census population, users and tweets. Messages
/// whose county is not in the MSA are excluded. Each user counts once, in the
/// county where they posted most (ties by lowest county_id).
RepresentationTable representation_table(const std::vector<GeocodedMessage>& sample,
                                          const GeoIndex& index);

/// msa,county,pop_share,user_share,tweet_share
std::string representation_csv(const RepresentationTable& table);
/// msa,num_counties,tweets,users,l1_population_users,l1_population_tweets
std::string representation_summary_csv(const RepresentationTable& table);

}  // namespace geolex::geo

#include "geolex/geo.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "geolex/csv.hpp"
#include "geolex/error.hpp"
#include "geolex/text.hpp"

namespace geolex::geo {

using nlohmann::json;

namespace {

std::string property_string(const json& props, const char* key, bool required) {
    if (!props.contains(key) || props[key].is_null()) {
        if (required) throw DataError(std::string("county feature missing property '") + key + "'");
        return {};
    }
    const auto& v = props[key];
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    throw DataError(std::string("county property '") + key + "' must be a string or integer");
}

Ring parse_ring(const json& coords) {
    if (!coords.is_array()) throw DataError("GeoJSON ring must be an array");
    Ring ring;
    ring.reserve(coords.size());
    for (const auto& pt : coords) {
        if (!pt.is_array() || pt.size() < 2) throw DataError("GeoJSON position must be [lon, lat]");
        ring.push_back({pt[0].get<double>(), pt[1].get<double>()});
    }
    return ring;
}

void append_polygon(const json& polygon, std::vector<Ring>& rings) {
    if (!polygon.is_array()) throw DataError("GeoJSON polygon must be an array of rings");
    for (const auto& r : polygon) rings.push_back(parse_ring(r));
}

bool on_segment(const Vertex& a, const Vertex& b, double px, double py) {
    const double cross = (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
    const double scale = std::max({std::fabs(b.x - a.x), std::fabs(b.y - a.y), 1e-300});
    if (std::fabs(cross) > 1e-12 * scale) return false;
    return px >= std::min(a.x, b.x) - 1e-12 && px <= std::max(a.x, b.x) + 1e-12 &&
           py >= std::min(a.y, b.y) - 1e-12 && py <= std::max(a.y, b.y) + 1e-12;
}

}  // namespace

GeoIndex::GeoIndex(std::vector<County> counties, std::vector<GazetteerEntry> gazetteer,
                   std::map<std::string, std::string> msa_names)
    : counties_(std::move(counties)) {
    std::sort(counties_.begin(), counties_.end(),
              [](const County& a, const County& b) { return a.county_id < b.county_id; });
    for (std::size_t i = 0; i < counties_.size(); ++i) {
        auto& c = counties_[i];
        if (c.county_id.empty()) throw DataError("county with empty county_id");
        if (i > 0 && counties_[i - 1].county_id == c.county_id)
            throw DataError("duplicate county_id " + c.county_id);
        if (c.msa_id.empty()) throw DataError("county " + c.county_id + " has no msa_id");
        if (c.population <= 0) throw DataError("county " + c.county_id + " has non-positive population");
        if (c.rings.empty()) throw DataError("county " + c.county_id + " has no polygon");
        c.min_x = c.min_y = std::numeric_limits<double>::infinity();
        c.max_x = c.max_y = -std::numeric_limits<double>::infinity();
        for (const auto& ring : c.rings) {
            if (ring.size() < 4) throw DataError("county " + c.county_id + " has a ring with < 4 vertices");
            if (ring.front().x != ring.back().x || ring.front().y != ring.back().y)
                throw DataError("county " + c.county_id + " has an unclosed ring");
            for (const auto& v : ring) {
                c.min_x = std::min(c.min_x, v.x);
                c.max_x = std::max(c.max_x, v.x);
                c.min_y = std::min(c.min_y, v.y);
                c.max_y = std::max(c.max_y, v.y);
            }
        }
    }

    std::map<std::string, Msa> msas;
    for (std::size_t i = 0; i < counties_.size(); ++i) {
        auto& m = msas[counties_[i].msa_id];
        m.msa_id = counties_[i].msa_id;
        m.counties.push_back(i);
    }
    for (auto& [id, m] : msas) {
        auto it = msa_names.find(id);
        m.name = it != msa_names.end() ? it->second : id;
    }

    for (auto& g : gazetteer) {
        g.city = normalize_location(g.city);
        std::string st;
        for (char ch : text::trim(g.state_code)) st.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
        g.state_code = st;
        if (g.city.empty()) throw DataError("gazetteer row with empty city");
        auto it = msas.find(g.msa_id);
        if (it == msas.end()) throw DataError("gazetteer references unknown MSA " + g.msa_id);
        if (!g.state_code.empty()) {
            auto& codes = it->second.state_codes;
            if (std::find(codes.begin(), codes.end(), g.state_code) == codes.end()) codes.push_back(g.state_code);
        }
    }
    std::sort(gazetteer.begin(), gazetteer.end(), [](const GazetteerEntry& a, const GazetteerEntry& b) {
        return std::tie(a.city, a.state_code, a.msa_id) < std::tie(b.city, b.state_code, b.msa_id);
    });
    gazetteer.erase(std::unique(gazetteer.begin(), gazetteer.end(),
                                [](const GazetteerEntry& a, const GazetteerEntry& b) {
                                    return a.city == b.city && a.state_code == b.state_code &&
                                           a.msa_id == b.msa_id;
                                }),
                    gazetteer.end());
    gazetteer_ = std::move(gazetteer);

    for (auto& [id, m] : msas) {
        std::sort(m.state_codes.begin(), m.state_codes.end());
        msas_.push_back(std::move(m));
    }
}

const County* GeoIndex::find_county(std::string_view county_id) const {
    auto it = std::lower_bound(counties_.begin(), counties_.end(), county_id,
                               [](const County& c, std::string_view id) { return c.county_id < id; });
    if (it == counties_.end() || it->county_id != county_id) return nullptr;
    return &*it;
}

const Msa* GeoIndex::find_msa(std::string_view msa_id) const {
    auto it = std::lower_bound(msas_.begin(), msas_.end(), msa_id,
                               [](const Msa& m, std::string_view id) { return m.msa_id < id; });
    if (it == msas_.end() || it->msa_id != msa_id) return nullptr;
    return &*it;
}

std::span<const GazetteerEntry> GeoIndex::lookup_city(std::string_view city) const {
    auto lo = std::lower_bound(gazetteer_.begin(), gazetteer_.end(), city,
                               [](const GazetteerEntry& g, std::string_view c) { return g.city < c; });
    auto hi = std::upper_bound(lo, gazetteer_.end(), city,
                               [](std::string_view c, const GazetteerEntry& g) { return c < g.city; });
    return {lo, hi};
}

std::vector<County> parse_counties_geojson(std::string_view geojson) {
    json doc;
    try {
        doc = json::parse(geojson);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("county GeoJSON: ") + e.what());
    }
    if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features"))
        throw DataError("county GeoJSON must be a FeatureCollection");
    std::vector<County> out;
    try {
        for (const auto& f : doc["features"]) {
            const auto& props = f.at("properties");
            County c;
            c.county_id = property_string(props, "county_id", true);
            c.msa_id = property_string(props, "msa_id", true);
            c.name = property_string(props, "name", false);
            if (!props.contains("population") || !props["population"].is_number())
                throw DataError("county " + c.county_id + " missing numeric population");
            c.population = static_cast<std::int64_t>(std::llround(props["population"].get<double>()));
            const auto& geom = f.at("geometry");
            const std::string type = geom.at("type").get<std::string>();
            if (type == "Polygon") {
                append_polygon(geom.at("coordinates"), c.rings);
            } else if (type == "MultiPolygon") {
                for (const auto& poly : geom.at("coordinates")) append_polygon(poly, c.rings);
            } else {
                throw DataError("county " + c.county_id + ": unsupported geometry " + type);
            }
            out.push_back(std::move(c));
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("county GeoJSON: ") + e.what());
    }
    return out;
}

std::vector<County> load_counties_geojson(const std::string& path) {
    return parse_counties_geojson(csv::read_file(path));
}

namespace {

std::map<std::string, std::string> msa_names_from_geojson(std::string_view geojson) {
    std::map<std::string, std::string> names;
    const auto doc = json::parse(geojson);
    for (const auto& f : doc["features"]) {
        const auto& props = f["properties"];
        if (props.contains("msa_name") && props["msa_name"].is_string())
            names[property_string(props, "msa_id", true)] = props["msa_name"].get<std::string>();
    }
    return names;
}

}  // namespace

std::vector<GazetteerEntry> parse_gazetteer_csv(std::string_view text) {
    const auto rows = csv::parse(text);
    if (rows.empty()) throw DataError("gazetteer CSV is empty");
    const auto& header = rows.front();
    const auto ci = csv::column(header, "city", "gazetteer");
    const auto si = csv::column(header, "state_code", "gazetteer");
    const auto mi = csv::column(header, "msa_id", "gazetteer");
    std::vector<GazetteerEntry> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() <= std::max({ci, si, mi}))
            throw DataError("gazetteer row " + std::to_string(r + 1) + " has too few columns");
        out.push_back({row[ci], row[si], row[mi]});
    }
    return out;
}

std::vector<GazetteerEntry> load_gazetteer_csv(const std::string& path) {
    return parse_gazetteer_csv(csv::read_file(path));
}

GeoIndex load_geo_index(const std::string& counties_geojson, const std::string& gazetteer_csv) {
    const auto text = csv::read_file(counties_geojson);
    auto counties = parse_counties_geojson(text);
    return GeoIndex(std::move(counties), load_gazetteer_csv(gazetteer_csv), msa_names_from_geojson(text));
}

bool county_contains(const County& county, const corpus::GeoPoint& point) {
    const double px = point.lon;
    const double py = point.lat;
    if (px < county.min_x || px > county.max_x || py < county.min_y || py > county.max_y) return false;
    bool inside = false;
    for (const auto& ring : county.rings) {
        for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
            const auto& a = ring[i];
            const auto& b = ring[i + 1];
            if (on_segment(a, b, px, py)) return true;
            if ((a.y > py) != (b.y > py)) {
                const double x_cross = a.x + (py - a.y) * (b.x - a.x) / (b.y - a.y);
                if (px < x_cross) inside = !inside;
            }
        }
    }
    return inside;
}

std::optional<std::string> reverse_geocode(const corpus::GeoPoint& point, const GeoIndex& index) {
    if (!corpus::valid_point(point) || !std::isfinite(point.lat) || !std::isfinite(point.lon))
        throw DomainError("reverse_geocode: coordinates out of range");
    // Counties are sorted by id, so the first hit is the lowest id.
    for (const auto& c : index.counties())
        if (county_contains(c, point)) return c.county_id;
    return std::nullopt;
}

std::string normalize_location(std::string_view raw) {
    auto s = text::lowercase(text::collapse_whitespace(raw));
    return text::trim(text::strip_trailing_punct(s));
}

std::optional<std::string> match_location_field(std::string_view raw, const GeoIndex& index) {
    const auto norm = normalize_location(raw);
    if (norm.empty()) return std::nullopt;
    const auto comma = norm.rfind(',');
    if (comma == std::string::npos) {
        std::set<std::string> msas;
        for (const auto& g : index.lookup_city(norm)) msas.insert(g.msa_id);
        if (msas.size() != 1) return std::nullopt;
        return *msas.begin();
    }
    const auto city = normalize_location(norm.substr(0, comma));
    const auto state_raw = text::trim(norm.substr(comma + 1));
    if (state_raw.size() != 2 || !std::isalpha(static_cast<unsigned char>(state_raw[0])) ||
        !std::isalpha(static_cast<unsigned char>(state_raw[1])))
        return std::nullopt;
    std::string state;
    for (char ch : state_raw) state.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
    std::set<std::string> msas;
    for (const auto& g : index.lookup_city(city)) {
        if (g.state_code != state) continue;
        const auto* m = index.find_msa(g.msa_id);
        if (m && std::binary_search(m->state_codes.begin(), m->state_codes.end(), state)) msas.insert(g.msa_id);
    }
    if (msas.size() != 1) return std::nullopt;
    return *msas.begin();
}

double l1_distance(std::span<const double> p, std::span<const double> t) {
    if (p.size() != t.size()) throw DomainError("l1_distance: length mismatch");
    if (p.empty()) throw DomainError("l1_distance: empty vectors");
    double sp = 0.0, st = 0.0, d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!(p[i] >= 0.0) || !(t[i] >= 0.0)) throw DomainError("l1_distance: negative or NaN entry");
        sp += p[i];
        st += t[i];
        d += std::fabs(p[i] - t[i]);
    }
    if (std::fabs(sp - 1.0) > 1e-6 || std::fabs(st - 1.0) > 1e-6)
        throw DomainError("l1_distance: inputs must sum to 1");
    return d;
}

RepresentationTable representation_table(const std::vector<GeocodedMessage>& sample,
                                          const GeoIndex& index) {
    // msa -> county -> (tweets), msa -> user -> county -> tweets
    std::unordered_map<std::string, std::map<std::string, std::int64_t>> tweets;
    std::unordered_map<std::string, std::map<std::string, std::map<std::string, std::int64_t>>> users;
    for (const auto& m : sample) {
        if (m.county_id.empty()) continue;
        const auto* c = index.find_county(m.county_id);
        if (!c || c->msa_id != m.msa_id) continue;
        ++tweets[m.msa_id][m.county_id];
        ++users[m.msa_id][m.user_id][m.county_id];
    }

    RepresentationTable table;
    for (const auto& msa : index.msas()) {
        MsaRepresentation rep;
        rep.msa_id = msa.msa_id;
        rep.msa_name = msa.name;
        std::int64_t pop_total = 0;
        for (auto ci : msa.counties) pop_total += index.counties()[ci].population;

        std::map<std::string, std::int64_t> user_counts;
        if (auto it = users.find(msa.msa_id); it != users.end()) {
            for (const auto& [uid, per_county] : it->second) {
                // map iteration is by county_id, so strict '>' keeps the lowest id on ties.
                std::string best;
                std::int64_t best_n = -1;
                for (const auto& [cid, n] : per_county)
                    if (n > best_n) {
                        best = cid;
                        best_n = n;
                    }
                ++user_counts[best];
            }
        }
        const auto& tw = tweets[msa.msa_id];
        for (const auto& [cid, n] : tw) rep.tweets += n;
        for (const auto& [cid, n] : user_counts) rep.users += n;

        std::vector<double> pop_share, user_share, tweet_share;
        for (auto ci : msa.counties) {
            const auto& county = index.counties()[ci];
            CountyShare s;
            s.county_id = county.county_id;
            s.population_share = static_cast<double>(county.population) / static_cast<double>(pop_total);
            if (auto it = tw.find(county.county_id); it != tw.end()) s.tweets = it->second;
            if (auto it = user_counts.find(county.county_id); it != user_counts.end()) s.users = it->second;
            if (rep.tweets > 0) {
                s.tweet_share = static_cast<double>(s.tweets) / static_cast<double>(rep.tweets);
                s.user_share = static_cast<double>(s.users) / static_cast<double>(rep.users);
            }
            pop_share.push_back(s.population_share);
            user_share.push_back(s.user_share);
            tweet_share.push_back(s.tweet_share);
            rep.counties.push_back(std::move(s));
        }
        if (rep.tweets > 0) {
            rep.l1_population_users = l1_distance(pop_share, user_share);
            rep.l1_population_tweets = l1_distance(pop_share, tweet_share);
        }
        table.msas.push_back(std::move(rep));
    }
    return table;
}

std::string representation_csv(const RepresentationTable& table) {
    std::ostringstream os;
    os << "msa,county,pop_share,user_share,tweet_share\n";
    for (const auto& m : table.msas) {
        for (const auto& c : m.counties) {
            os << csv::escape(m.msa_id) << ',' << csv::escape(c.county_id) << ','
               << csv::format_double(c.population_share) << ',';
            if (m.tweets > 0) {
                os << csv::format_double(c.user_share) << ',' << csv::format_double(c.tweet_share);
            } else {
                os << ',';
            }
            os << '\n';
        }
    }
    return os.str();
}

std::string representation_summary_csv(const RepresentationTable& table) {
    std::ostringstream os;
    os << "msa,num_counties,tweets,users,l1_population_users,l1_population_tweets\n";
    for (const auto& m : table.msas) {
        os << csv::escape(m.msa_id) << ',' << m.counties.size() << ',' << m.tweets << ',' << m.users << ','
           << (m.l1_population_users ? csv::format_double(*m.l1_population_users) : "") << ','
           << (m.l1_population_tweets ? csv::format_double(*m.l1_population_tweets) : "") << '\n';
    }
    return os.str();
}

}  // namespace geolex::geo

#include "geolex/sampling.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "geolex/csv.hpp"
#include "geolex/stats.hpp"

namespace geolex::sampling {

std::string_view to_string(Scheme s) {
    switch (s) {
    case Scheme::gps_msa: return "gps_msa";
    case Scheme::gps_county: return "gps_county";
    case Scheme::loc_msa: return "loc_msa";
    }
    return "gps_msa";
}

std::string_view to_string(Unit u) { return u == Unit::message ? "message" : "user"; }

Scheme parse_scheme(std::string_view s) {
    if (s == "gps_msa") return Scheme::gps_msa;
    if (s == "gps_county") return Scheme::gps_county;
    if (s == "loc_msa") return Scheme::loc_msa;
    throw ValidationError("unknown sampling scheme '" + std::string(s) + "'");
}

Unit parse_unit(std::string_view s) {
    if (s == "message") return Unit::message;
    if (s == "user") return Unit::user;
    throw ValidationError("unknown sampling unit '" + std::string(s) + "'");
}

ShortfallError::ShortfallError(std::string msa_id, std::size_t available, std::size_t required)
    : DataError("MSA '" + msa_id + "' has " + std::to_string(available) + " candidates but " +
                std::to_string(required) + " are required (lower the sample size or set allow_short)"),
      msa_id_(std::move(msa_id)),
      available_(available),
      required_(required) {}

namespace {
__extension__ typedef __int128 wide_int;
}  // namespace

std::vector<std::int64_t> largest_remainder(std::span<const std::int64_t> weights, std::int64_t n) {
    if (n < 0) throw DomainError("largest_remainder: negative seat count");
    wide_int total = 0;
    for (auto w : weights) {
        if (w < 0) throw DomainError("largest_remainder: negative weight");
        total += w;
    }
    std::vector<std::int64_t> seats(weights.size(), 0);
    if (n == 0) return seats;
    if (total == 0) throw DomainError("largest_remainder: all weights are zero");
    std::vector<wide_int> remainder(weights.size());
    std::int64_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const wide_int scaled = static_cast<wide_int>(n) * weights[i];
        seats[i] = static_cast<std::int64_t>(scaled / total);
        remainder[i] = scaled % total;
        assigned += seats[i];
    }
    std::vector<std::size_t> order(weights.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++seats[order[k]];
    return seats;
}

std::vector<std::int64_t> allocate_with_capacity(std::span<const std::int64_t> weights,
                                                 std::span<const std::int64_t> capacity,
                                                 std::int64_t n, std::vector<std::string>* warnings) {
    if (weights.size() != capacity.size()) throw DomainError("allocate_with_capacity: size mismatch");
    const std::int64_t total_capacity = std::accumulate(capacity.begin(), capacity.end(), std::int64_t{0});
    if (total_capacity < n) throw DomainError("allocate_with_capacity: capacity below n");
    auto alloc = largest_remainder(weights, n);
    for (int round = 1;; ++round) {
        std::int64_t deficit = 0;
        for (std::size_t i = 0; i < alloc.size(); ++i) {
            if (alloc[i] > capacity[i]) {
                deficit += alloc[i] - capacity[i];
                alloc[i] = capacity[i];
            }
        }
        if (deficit == 0) break;
        std::vector<std::int64_t> open_weights(weights.size(), 0);
        for (std::size_t i = 0; i < alloc.size(); ++i)
            if (alloc[i] < capacity[i]) open_weights[i] = weights[i];
        if (std::all_of(open_weights.begin(), open_weights.end(), [](auto w) { return w == 0; }))
            // Spare capacity only in zero-weight counties: fall back to spare capacity itself.
            for (std::size_t i = 0; i < alloc.size(); ++i) open_weights[i] = capacity[i] - alloc[i];
        const auto extra = largest_remainder(open_weights, deficit);
        for (std::size_t i = 0; i < alloc.size(); ++i) alloc[i] += extra[i];
        if (warnings)
            warnings->push_back("redistribution round " + std::to_string(round) + ": " +
                                std::to_string(deficit) + " units moved from full counties");
    }
    return alloc;
}

namespace {

// message_id -> candidate, sorted and deduplicated.
std::vector<Candidate> canonical(const std::vector<Candidate>& candidates) {
    std::vector<Candidate> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates)
        if (!c.msa_id.empty()) out.push_back(c);
    std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
        return std::tie(a.message_id, a.msa_id, a.county_id) < std::tie(b.message_id, b.msa_id, b.county_id);
    });
    out.erase(std::unique(out.begin(), out.end(),
                          [](const Candidate& a, const Candidate& b) { return a.message_id == b.message_id; }),
              out.end());
    return out;
}

template <typename Key>
std::string modal(const std::map<std::string, Key>& counts) {
    std::string best;
    Key best_n{};
    bool first = true;
    for (const auto& [k, n] : counts) {
        if (first || n > best_n) {
            best = k;
            best_n = n;
            first = false;
        }
    }
    return best;
}

// Assigns each user a home MSA (and home county within it) and keeps only the
// candidates from the home MSA, relabelled with the home county.
std::vector<Candidate> restrict_to_home(const std::vector<Candidate>& candidates, bool by_county) {
    std::map<std::string, std::map<std::string, std::size_t>> msa_counts;
    for (const auto& c : candidates) ++msa_counts[c.user_id][c.msa_id];
    std::map<std::string, std::string> home_msa;
    for (const auto& [u, counts] : msa_counts) home_msa[u] = modal(counts);

    std::map<std::string, std::map<std::string, std::size_t>> county_counts;
    std::vector<Candidate> out;
    for (const auto& c : candidates) {
        if (home_msa[c.user_id] != c.msa_id) continue;
        if (by_county && !c.county_id.empty()) ++county_counts[c.user_id][c.county_id];
        out.push_back(c);
    }
    if (by_county) {
        std::map<std::string, std::string> home_county;
        for (const auto& [u, counts] : county_counts) home_county[u] = modal(counts);
        for (auto& c : out) {
            auto it = home_county.find(c.user_id);
            c.county_id = it != home_county.end() ? it->second : std::string{};
        }
    }
    return out;
}

void finish(Sample& sample) {
    std::sort(sample.members.begin(), sample.members.end(), [](const SampleMember& a, const SampleMember& b) {
        return std::tie(a.msa_id, a.county_id, a.user_id, a.message_id) <
               std::tie(b.msa_id, b.county_id, b.user_id, b.message_id);
    });
}

// Draws `k` units from the sorted pool and appends their messages.
void draw(const std::vector<std::string>& units, std::size_t k, stats::RngStream& rng,
          const std::map<std::string, std::vector<const Candidate*>>& messages_of, Sample& sample) {
    for (auto idx : rng.sample_without_replacement(units.size(), k)) {
        for (const auto* c : messages_of.at(units[idx]))
            sample.members.push_back({c->msa_id, c->county_id, c->user_id, c->message_id});
    }
}

}  // namespace

Sample sample_msa_balanced(const std::vector<Candidate>& candidates, Scheme scheme,
                           const SampleOptions& options) {
    Sample sample;
    sample.scheme = scheme;
    sample.unit = options.unit;
    sample.seed = options.seed;

    auto pool = canonical(candidates);
    if (options.unit == Unit::user) pool = restrict_to_home(pool, false);

    // msa -> unit id -> messages
    std::map<std::string, std::map<std::string, std::vector<const Candidate*>>> by_msa;
    for (const auto& c : pool) {
        const auto& key = options.unit == Unit::message ? c.message_id : c.user_id;
        by_msa[c.msa_id][key].push_back(&c);
    }
    for (const auto& [msa, groups] : by_msa) {
        std::vector<std::string> units;
        units.reserve(groups.size());
        for (const auto& [id, msgs] : groups) units.push_back(id);
        std::size_t k = options.n_per_msa;
        if (units.size() < k) {
            if (!options.allow_short) throw ShortfallError(msa, units.size(), k);
            sample.warnings.push_back("MSA " + msa + ": only " + std::to_string(units.size()) + " of " +
                                      std::to_string(k) + " units available");
            k = units.size();
        }
        stats::RngStream rng(options.seed, stats::fnv1a64(msa));
        draw(units, k, rng, groups, sample);
    }
    finish(sample);
    return sample;
}

Sample sample_county_balanced(const std::vector<Candidate>& candidates, const geo::GeoIndex& index,
                              const SampleOptions& options) {
    Sample sample;
    sample.scheme = Scheme::gps_county;
    sample.unit = options.unit;
    sample.seed = options.seed;

    auto pool = canonical(candidates);
    if (options.unit == Unit::user) pool = restrict_to_home(pool, true);

    // msa -> county -> unit id -> messages
    std::map<std::string, std::map<std::string, std::map<std::string, std::vector<const Candidate*>>>> grouped;
    for (const auto& c : pool) {
        if (c.county_id.empty()) continue;
        const auto* county = index.find_county(c.county_id);
        if (!county || county->msa_id != c.msa_id) continue;
        const auto& key = options.unit == Unit::message ? c.message_id : c.user_id;
        grouped[c.msa_id][c.county_id][key].push_back(&c);
    }

    for (const auto& msa : index.msas()) {
        const auto& counties_here = grouped[msa.msa_id];
        std::vector<std::int64_t> weights, capacity;
        std::vector<std::vector<std::string>> units;
        for (auto ci : msa.counties) {
            const auto& county = index.counties()[ci];
            weights.push_back(county.population);
            std::vector<std::string> ids;
            if (auto it = counties_here.find(county.county_id); it != counties_here.end())
                for (const auto& [id, msgs] : it->second) ids.push_back(id);
            capacity.push_back(static_cast<std::int64_t>(ids.size()));
            units.push_back(std::move(ids));
        }
        const auto available = static_cast<std::size_t>(std::accumulate(capacity.begin(), capacity.end(), std::int64_t{0}));
        std::size_t n = options.n_per_msa;
        if (available < n) {
            if (!options.allow_short) throw ShortfallError(msa.msa_id, available, n);
            sample.warnings.push_back("MSA " + msa.msa_id + ": only " + std::to_string(available) + " of " +
                                      std::to_string(n) + " units available");
            n = available;
        }
        std::vector<std::string> round_warnings;
        const auto quota = allocate_with_capacity(weights, capacity, static_cast<std::int64_t>(n), &round_warnings);
        for (auto& w : round_warnings) sample.warnings.push_back("MSA " + msa.msa_id + ": " + w);
        for (std::size_t k = 0; k < msa.counties.size(); ++k) {
            if (quota[k] == 0) continue;
            const auto& county = index.counties()[msa.counties[k]];
            stats::RngStream rng(options.seed, stats::fnv1a64(msa.msa_id + "/" + county.county_id));
            draw(units[k], static_cast<std::size_t>(quota[k]), rng, counties_here.at(county.county_id), sample);
        }
    }
    finish(sample);
    return sample;
}

std::string manifest_csv(const Sample& sample) {
    std::ostringstream os;
    os << "scheme,unit,msa,county,user_id,message_id,seed\n";
    for (const auto& m : sample.members) {
        os << to_string(sample.scheme) << ',' << to_string(sample.unit) << ',' << csv::escape(m.msa_id) << ','
           << csv::escape(m.county_id) << ',' << csv::escape(m.user_id) << ',' << csv::escape(m.message_id)
           << ',' << sample.seed << '\n';
    }
    return os.str();
}

Sample parse_manifest_csv(std::string_view text) {
    const auto rows = csv::parse(text);
    if (rows.empty()) throw DataError("sample manifest is empty");
    const auto& h = rows.front();
    const auto si = csv::column(h, "scheme", "manifest");
    const auto ui = csv::column(h, "unit", "manifest");
    const auto mi = csv::column(h, "msa", "manifest");
    const auto ci = csv::column(h, "county", "manifest");
    const auto usr = csv::column(h, "user_id", "manifest");
    const auto msg = csv::column(h, "message_id", "manifest");
    const auto sd = csv::column(h, "seed", "manifest");
    Sample s;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() < h.size()) throw DataError("manifest row " + std::to_string(r + 1) + " is short");
        if (r == 1) {
            s.scheme = parse_scheme(row[si]);
            s.unit = parse_unit(row[ui]);
            s.seed = std::stoull(row[sd]);
        }
        s.members.push_back({row[mi], row[ci], row[usr], row[msg]});
    }
    return s;
}

}  // namespace geolex::sampling

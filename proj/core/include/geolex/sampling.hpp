#pragma once

// Balanced subsamples of geocoded corpora: equal size per MSA, or allocated
// across each MSA's counties in proportion to census population.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geolex/error.hpp"
#include "geolex/geo.hpp"

namespace geolex::sampling {

enum class Scheme { gps_msa, gps_county, loc_msa };
enum class Unit { message, user };

std::string_view to_string(Scheme s);
std::string_view to_string(Unit u);
Scheme parse_scheme(std::string_view s);
Unit parse_unit(std::string_view s);

/// A message eligible for sampling with its MSA (and, for GPS data, county).
struct Candidate {
    std::string message_id;
    std::string user_id;
    std::string msa_id;
    std::string county_id;  // empty when unknown
};

struct SampleMember {
    std::string msa_id;
    std::string county_id;
    std::string user_id;
    std::string message_id;

    friend bool operator==(const SampleMember&, const SampleMember&) = default;
};

struct Sample {
    Scheme scheme = Scheme::gps_msa;
    Unit unit = Unit::message;
    std::uint64_t seed = 0;
    /// Sorted by (msa, county, user, message); no duplicate message ids.
    std::vector<SampleMember> members;
    std::vector<std::string> warnings;
};

/// An MSA (or the whole sample) lacks enough candidates.
class ShortfallError : public DataError {
public:
    ShortfallError(std::string msa_id, std::size_t available, std::size_t required);

    const std::string& msa_id() const noexcept { return msa_id_; }
    std::size_t available() const noexcept { return available_; }
    std::size_t required() const noexcept { return required_; }

private:
    std::string msa_id_;
    std::size_t available_;
    std::size_t required_;
};

struct SampleOptions {
    Unit unit = Unit::message;
    std::size_t n_per_msa = 25000;
    std::uint64_t seed = 0;
    /// Take every candidate of an under-populated MSA instead of failing.
    bool allow_short = false;
};

/// Default sizes: 25,000 messages or 2,500 users per MSA.
inline constexpr std::size_t kDefaultMessagesPerMsa = 25000;
inline constexpr std::size_t kDefaultUsersPerMsa = 2500;

/// Uniform sampling without replacement within each MSA. Each MSA draws from
/// its own stream, RngStream(seed, fnv1a64(msa_id)), over its candidates
/// sorted by id. For unit=user, every user is first assigned to the MSA where
/// they have most candidates (ties by lowest msa_id); a sampled user brings
/// all of their messages in that MSA.
Sample sample_msa_balanced(const std::vector<Candidate>& candidates, Scheme scheme,
                           const SampleOptions& options);

/// Allocates n across each MSA's counties by largest-remainder apportionment
/// of census population, then samples uniformly inside each county (stream
/// fnv1a64(msa_id + "/" + county_id)). County deficits are reapportioned over
/// the counties with spare candidates, repeatedly, and noted in warnings.
Sample sample_county_balanced(const std::vector<Candidate>& candidates, const geo::GeoIndex& index,
                              const SampleOptions& options);

/// Hamilton apportionment of n seats over non-negative integer weights.
/// Exact integer arithmetic; remainder ties go to the lower index.
std::vector<std::int64_t> largest_remainder(std::span<const std::int64_t> weights, std::int64_t n);

/// Quotas per county after redistributing deficits; each quota is at most the
/// county's capacity. Appends one warning per redistribution round.
std::vector<std::int64_t> allocate_with_capacity(std::span<const std::int64_t> weights,
                                                 std::span<const std::int64_t> capacity,
                                                 std::int64_t n, std::vector<std::string>* warnings);

/// scheme,unit,msa,county,user_id,message_id,seed
std::string manifest_csv(const Sample& sample);
Sample parse_manifest_csv(std::string_view csv);

}  // namespace geolex::sampling

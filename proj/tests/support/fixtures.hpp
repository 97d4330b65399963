#pragma once

// Synthetic inputs shared by the unit and acceptance tests.

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "geolex/corpus.hpp"
#include "geolex/demographics.hpp"
#include "geolex/geo.hpp"
#include "geolex/geoloc.hpp"

namespace geolex::testing {

corpus::Message message(std::string id, std::string user, std::string text, std::string lang = "en");
corpus::UserProfile profile(std::string id, std::string name = "Test User", std::int64_t followers = 10,
                            std::int64_t followees = 10, std::int64_t statuses = 100);

/// 30 messages with exactly one violator of each filter rule, and the
/// survivors and exclusion counts worked out by hand.
struct FilterFixture {
    std::vector<corpus::Message> messages;
    std::vector<corpus::UserProfile> profiles;
    std::set<std::string> survivors;
    corpus::FilterReport expected;
};
FilterFixture filter_fixture();

/// Axis-aligned closed square ring.
std::vector<geo::Vertex> square(double x0, double y0, double x1, double y1);
geo::County county(std::string id, std::string msa, std::int64_t population, double x0, double y0, double x1,
                   double y1);

/// Birth records where every cell has three concentrated names plus two
/// names spread over all ages and both sexes, and a known latent-class model
/// with six signature words per cell over a 50-word vocabulary.
struct EmWorld {
    demographics::NameDemographics nd{2015};
    demographics::AgeBins bins;
    demographics::DemographicModel truth;
};
EmWorld em_world(double phi_alpha);

/// `classes` MSAs with `users_per_class` users each; every class has five
/// marker words drawn at ten times the background rate.
std::vector<geoloc::LabeledUser> geoloc_world(std::size_t classes, std::size_t users_per_class,
                                              std::size_t tokens_per_user, std::uint64_t seed);

}  // namespace geolex::testing

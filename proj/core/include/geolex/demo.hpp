#pragma once

// Synthetic demo world: ten MSAs of three rectangular counties each, a
// gazetteer, per-year birth-name tables, an annotated lexicon, a message
// corpus with regional and demographic marker words, and a TOML config that
// ties them together. Output is a pure function of the options.

#include <cstdint>
#include <string>

namespace geolex::demo {

struct DemoOptions {
    std::uint64_t seed = 20150101;
    int msas = 10;               // at most 10
    int users_per_msa = 110;
    double mean_messages = 16.0; // per user, before the heavy tail
    int collection_year = 2015;
};

struct DemoSummary {
    std::size_t users = 0;
    std::size_t messages = 0;
    std::size_t counties = 0;
    std::size_t name_files = 0;
};

/// Writes corpus.jsonl, counties.geojson, gazetteer.csv, names/yobYYYY.txt,
/// lexicon.csv and geolex.toml into `dir` (created if needed).
DemoSummary write_demo_world(const std::string& dir, const DemoOptions& options = {});

}  // namespace geolex::demo

#pragma once

// End-to-end orchestration: filter -> geocode -> sample -> demographics ->
// lexvar -> geoloc -> report, driven by one TOML file. Every stage reads its
// inputs from the output directory, writes CSV artifacts whose first line is
// a "# geolex ..." stamp, and is skipped when its content key is unchanged.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "geolex/corpus.hpp"
#include "geolex/demographics.hpp"
#include "geolex/geoloc.hpp"
#include "geolex/lexvar.hpp"
#include "geolex/sampling.hpp"

namespace geolex::pipeline {

namespace detail {
struct StageContext;
}

struct InputPaths {
    std::string corpus;     // JSON lines
    std::string counties;   // GeoJSON
    std::string gazetteer;  // CSV city,state_code,msa_id
    std::string names;      // directory of per-year name tables
    std::vector<std::string> lexicons;  // CSV term,label; optional
};

struct SamplingSettings {
    std::vector<sampling::Scheme> schemes{sampling::Scheme::gps_msa, sampling::Scheme::gps_county,
                                          sampling::Scheme::loc_msa};
    std::size_t messages_per_msa = sampling::kDefaultMessagesPerMsa;
    std::size_t users_per_msa = sampling::kDefaultUsersPerMsa;
    bool allow_short = false;
};

struct DemographicsSettings {
    int collection_year = 0;  // required
    std::vector<demographics::AgeBin> age_bins = demographics::AgeBins().bins();
    demographics::EmConfig em;
    double rare_name_ratio = 100.0;
};

struct LexvarSettings {
    bool enabled = true;
    lexvar::SageConfig sage;
    double background_alpha = 0.0;
    std::size_t top_k = 25;
};

struct GeolocSettings {
    bool enabled = true;
    std::size_t folds = 10;
    std::vector<double> lambda_grid{0.01, 0.1, 1.0, 10.0};
    std::vector<std::int64_t> usage_edges{1, 10, 20, 40, 80, 160, 320};
    bool soft_strata = false;
    int max_iter = 1000;
};

struct ReportSettings {
    std::vector<std::string> formats{"csv", "md", "svg"};
    bool svg_timestamp = true;
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    std::string out_dir = "geolex-out";
    InputPaths inputs;
    corpus::FilterConfig filter;
    SamplingSettings sampling;
    DemographicsSettings demographics;
    LexvarSettings lexvar;
    GeolocSettings geoloc;
    ReportSettings report;
    stats::BootstrapConfig bootstrap;  // seed derived from `seed`

    /// Relative paths resolve against `base_dir`. Unknown keys are a
    /// ValidationError.
    static PipelineConfig from_toml(std::string_view toml, const std::string& base_dir);
    static PipelineConfig load(const std::string& path);

    /// Value ranges and required fields; input paths must exist. Throws
    /// ValidationError.
    void validate() const;

    /// Canonical text of the settings that affect results (paths excluded).
    std::string canonical() const;
    /// fnv1a64 of canonical(), as 16 hex digits.
    std::string hash() const;
};

enum class Stage { filter, geocode, sample, demographics, lexvar, geoloc, report };

std::string_view to_string(Stage s);
/// Throws ValidationError for an unknown name.
Stage parse_stage(std::string_view s);
const std::vector<Stage>& all_stages();

struct StageOutcome {
    Stage stage = Stage::filter;
    bool cached = false;
    std::string key;
    std::vector<std::string> outputs;  // paths relative to out_dir
    std::vector<std::string> warnings;
};

struct RunOptions {
    bool force = false;       // ignore the stage cache
    std::ostream* log = nullptr;
};

/// Runs stages against one output directory. Errors keep their kind and are
/// prefixed with the stage name and a remediation hint.
class Pipeline {
public:
    explicit Pipeline(PipelineConfig config);

    const PipelineConfig& config() const noexcept { return config_; }

    /// Requires the artifacts of every upstream stage in out_dir.
    StageOutcome run_stage(Stage stage, const RunOptions& options = {});
    /// Every stage in order.
    std::vector<StageOutcome> run_all(const RunOptions& options = {});

private:
    PipelineConfig config_;
    std::shared_ptr<detail::StageContext> ctx_;  // inputs parsed once per Pipeline
};

/// First line of every CSV artifact.
std::string stamp_line(std::string_view stage, std::string_view key, std::uint64_t seed);

}  // namespace geolex::pipeline

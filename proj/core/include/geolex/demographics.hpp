#pragma once

// Age and gender from first names and birth-record counts, the rare-name
// filter, and a latent age-bin x gender model in which each author's name and
// word counts are both drawn from the author's demographic cell.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geolex/corpus.hpp"
#include "geolex/stats.hpp"

namespace geolex::demographics {

enum class Sex { female = 0, male = 1 };

/// Ages outside [0, kMaxAge] are not represented.
inline constexpr int kMaxAge = 95;
inline constexpr int kNumAges = kMaxAge + 1;

/// Birth counts for one name, indexed by sex then age.
struct NameRecord {
    std::array<std::vector<std::int64_t>, 2> by_age{std::vector<std::int64_t>(kNumAges, 0),
                                                    std::vector<std::int64_t>(kNumAges, 0)};
    std::array<std::int64_t, 2> by_sex{0, 0};

    std::int64_t total() const noexcept { return by_sex[0] + by_sex[1]; }
};

/// count(name, sex, birth_year) table. Names are lowercased on insert and
/// lookup; age = collection_year - birth_year.
class NameDemographics {
public:
    explicit NameDemographics(int collection_year = 2015) : collection_year_(collection_year) {}

    /// Births whose age falls outside [0, kMaxAge] are counted in
    /// out_of_range() and otherwise ignored.
    void add(std::string_view name, Sex sex, int birth_year, std::int64_t count);

    int collection_year() const noexcept { return collection_year_; }
    std::int64_t total_count() const noexcept { return total_; }
    std::int64_t out_of_range() const noexcept { return out_of_range_; }
    std::size_t size() const noexcept { return names_.size(); }

    const NameRecord* find(std::string_view name) const;
    std::int64_t name_total(std::string_view name) const;
    const std::map<std::string, NameRecord, std::less<>>& names() const noexcept { return names_; }

private:
    int collection_year_;
    std::int64_t total_ = 0;
    std::int64_t out_of_range_ = 0;
    std::map<std::string, NameRecord, std::less<>> names_;
};

/// Reads every file in `directory` whose name contains a four-digit year
/// (e.g. yob1990.txt); lines are "name,sex,count" with sex F or M. An
/// optional header line is skipped. Throws IoError/DataError.
NameDemographics load_name_tables(const std::string& directory, int collection_year);

/// Probability over ages 0..kMaxAge.
struct AgeDistribution {
    std::vector<double> p = std::vector<double>(kNumAges, 0.0);

    double expected_age() const;
};

/// p(age | name) = count(name, age) / sum over ages. None for unknown names.
std::optional<AgeDistribution> name_age_dist(std::string_view name, const NameDemographics& nd);

/// p(female | name). None for unknown names.
std::optional<double> name_gender(std::string_view name, const NameDemographics& nd);

struct SampleAgeResult {
    AgeDistribution distribution;
    std::size_t resolved = 0;
    std::size_t skipped = 0;
};

/// p_D(age) proportional to the sum of p(age | name_i) over resolvable names.
/// Throws DataError when no name resolves.
SampleAgeResult sample_age_dist(std::span<const std::string> names, const NameDemographics& nd);

struct NamedUser {
    std::string user_id;
    std::string name;  // normalized first name
    std::int64_t messages = 0;
};

struct RareNameReport {
    std::vector<NamedUser> kept;
    std::vector<NamedUser> dropped;
    std::size_t dropped_absent = 0;  // name not in the birth records
    std::size_t dropped_rare = 0;    // corpus frequency >= ratio x record frequency
    double user_fraction_dropped = 0.0;
    double message_fraction_dropped = 0.0;
};

/// Drops users whose name is absent from `nd`, or whose relative frequency
/// among the users is at least `ratio` times its relative frequency in `nd`.
RareNameReport filter_rare_names(const std::vector<NamedUser>& users, const NameDemographics& nd,
                                 double ratio = 100.0);

/// Mean of the per-user expected age, with a percentile bootstrap over users.
/// Unresolvable names are skipped; throws DataError when none resolve.
stats::Interval expected_age(std::span<const std::string> names, const NameDemographics& nd,
                             const stats::BootstrapConfig& config);

/// Mean p(female | name) over users, bootstrapped like expected_age.
stats::Interval female_share(std::span<const std::string> names, const NameDemographics& nd,
                             const stats::BootstrapConfig& config);

struct AgeBin {
    int lo = 0;
    int hi = 0;  // inclusive
};

/// Ordered, disjoint, contiguous integer intervals covering [0, kMaxAge].
class AgeBins {
public:
    /// 0-17, 18-29, 30-39, 40+.
    AgeBins();
    /// Throws ValidationError unless the bins tile [0, kMaxAge].
    explicit AgeBins(std::vector<AgeBin> bins);

    std::size_t size() const noexcept { return bins_.size(); }
    const AgeBin& operator[](std::size_t i) const { return bins_[i]; }
    const std::vector<AgeBin>& bins() const noexcept { return bins_; }
    std::size_t bin_of(int age) const;
    std::string label(std::size_t i) const;

private:
    std::vector<AgeBin> bins_;
};

struct EmConfig {
    double theta_alpha = 0.1;  // add-alpha smoothing of word distributions
    double phi_alpha = 0.01;   // add-alpha smoothing of name distributions
    int max_iter = 200;
    double tol = 1e-6;  // relative objective change
    /// Model gender as a latent variable (cells = bins x {F, M}). When false,
    /// cells are age bins alone and name counts pool both sexes.
    bool joint_gender = true;
};

/// Latent-class parameters. Cell c has age bin c / G and gender c % G, with
/// G = 2 when gender is modelled (0 = F, 1 = M), else 1.
struct DemographicModel {
    AgeBins bins;
    bool joint_gender = true;
    std::vector<std::string> names;       // name vocabulary of phi, sorted
    std::vector<std::string> vocabulary;  // word vocabulary of theta, sorted
    std::vector<double> pi;               // per age bin
    std::vector<std::vector<double>> phi;    // [cell][name], clamped
    std::vector<std::vector<double>> theta;  // [cell][word]

    // Fit diagnostics.
    std::vector<std::vector<double>> posteriors;  // [user][cell], em_fit input order
    std::vector<bool> name_fallback;              // per user: name outside phi support
    /// Log-likelihood plus the log Dirichlet smoothing term on theta: the
    /// quantity EM increases monotonically.
    std::vector<double> objective_trace;
    std::vector<double> log_likelihood_trace;
    int iterations = 0;
    bool converged = false;

    std::size_t genders() const noexcept { return joint_gender ? 2 : 1; }
    std::size_t cells() const noexcept { return bins.size() * genders(); }
    std::size_t cell_bin(std::size_t cell) const noexcept { return cell / genders(); }
    std::optional<Sex> cell_sex(std::size_t cell) const noexcept;
    std::string cell_label(std::size_t cell) const;
    double gender_prior() const noexcept { return joint_gender ? 0.5 : 1.0; }

    std::optional<std::size_t> name_index(std::string_view name) const;
    std::optional<std::size_t> word_index(std::string_view word) const;
};

/// Name distribution per cell from the birth records: count of the name over
/// the cell's ages (and sex), plus alpha, normalized over all names.
struct PhiTable {
    std::vector<std::string> names;
    std::vector<std::vector<double>> phi;  // [cell][name]
};
PhiTable build_phi(const NameDemographics& nd, const AgeBins& bins, bool joint_gender, double alpha);

struct EmUser {
    std::string name;
    corpus::TokenCounts token_counts;
};

/// Expectation-maximization with phi clamped to build_phi(nd, ...). pi starts
/// uniform; theta starts from name-prior-weighted word counts. Stops when the
/// objective changes by less than config.tol relatively, or after max_iter
/// M-steps. Throws DataError for zero users or an empty vocabulary and
/// NumericalError (with the iteration index) for a non-finite objective.
DemographicModel em_fit(const std::vector<EmUser>& users, const NameDemographics& nd, const AgeBins& bins,
                        const EmConfig& config = {});

struct CellPosterior {
    std::vector<double> p;  // per cell
    bool name_fallback = false;

    std::size_t argmax() const;
};

/// Posterior over cells for a new author. Words outside the vocabulary are
/// ignored; a name outside phi's support contributes a uniform name term and
/// sets name_fallback.
CellPosterior em_posterior(const DemographicModel& model, std::string_view name,
                           const corpus::TokenCounts& token_counts);

struct SyntheticUser {
    std::string name;
    corpus::TokenCounts token_counts;
    std::size_t age_bin = 0;
    std::optional<Sex> sex;
    std::size_t cell = 0;
};

/// Forward sampling from `truth` (pi, phi, theta, names, vocabulary):
/// age bin ~ pi, gender ~ uniform, name ~ phi[cell], tokens_per_user
/// words ~ theta[cell]. Deterministic for a seed.
std::vector<SyntheticUser> generate_synthetic(const DemographicModel& truth, std::size_t n_users,
                                              std::size_t tokens_per_user, std::uint64_t seed);

/// TSV blocks ([meta], [bins], [pi], [phi], [theta], [trace]); probabilities
/// written with 17 significant digits so a reload is exact.
std::string write_model_tsv(const DemographicModel& model);
DemographicModel read_model_tsv(std::string_view tsv);

}  // namespace geolex::demographics

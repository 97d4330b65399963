#pragma once

// Text-based geolocation: multinomial logistic regression over raw token
// counts, user-level cross-validation with a development fold, and accuracy
// broken down by demographic stratum and usage bin.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geolex/corpus.hpp"
#include "geolex/stats.hpp"

namespace geolex::geoloc {

/// Sorted term list with index lookup.
class Vocabulary {
public:
    Vocabulary() = default;
    explicit Vocabulary(std::vector<std::string> terms);

    /// Union of the terms with positive counts.
    static Vocabulary from_counts(std::span<const corpus::TokenCounts* const> documents);

    std::optional<std::size_t> index(std::string_view term) const;
    std::size_t size() const noexcept { return terms_.size(); }
    const std::vector<std::string>& terms() const noexcept { return terms_; }

private:
    std::vector<std::string> terms_;
};

struct SparseVector {
    std::vector<std::pair<std::uint32_t, double>> entries;  // by index, values nonzero
};

/// Raw counts over the vocabulary; other tokens are dropped.
SparseVector featurize(const corpus::TokenCounts& counts, const Vocabulary& vocabulary);

struct Dataset {
    std::vector<SparseVector> x;
    std::vector<std::size_t> y;
    std::size_t features = 0;
    std::size_t classes = 0;
};

struct TrainConfig {
    double lambda = 1.0;
    int max_iter = 1000;
    double tol = 1e-8;  // relative objective change
    int history = 10;   // L-BFGS memory
};

/// classes x features weights plus an unpenalized bias per class.
class GeoClassifier {
public:
    GeoClassifier() = default;
    GeoClassifier(std::size_t classes, std::size_t features, double lambda);

    std::size_t classes() const noexcept { return classes_; }
    std::size_t features() const noexcept { return features_; }
    double lambda() const noexcept { return lambda_; }

    /// Parameters laid out as W (row-major, class by feature) then bias.
    std::vector<double>& parameters() noexcept { return params_; }
    const std::vector<double>& parameters() const noexcept { return params_; }
    double weight(std::size_t k, std::size_t j) const { return params_[k * features_ + j]; }
    double bias(std::size_t k) const { return params_[classes_ * features_ + k]; }

    std::vector<double> scores(const SparseVector& x) const;
    std::vector<double> probabilities(const SparseVector& x) const;
    /// Highest score; ties to the lower class index.
    std::size_t predict(const SparseVector& x) const;

    std::vector<double> objective_trace;
    bool converged = false;

private:
    std::size_t classes_ = 0;
    std::size_t features_ = 0;
    double lambda_ = 0.0;
    std::vector<double> params_;
};

/// Summed cross-entropy plus (lambda / 2) |W|^2, and its gradient.
double objective(const Dataset& data, double lambda, std::span<const double> params, std::span<double> grad);

/// L-BFGS with Armijo backtracking from zero weights and log class-frequency
/// biases; every accepted step lowers the objective. Throws DataError when a
/// class has no example and ValidationError unless lambda > 0.
GeoClassifier train(const Dataset& data, const TrainConfig& config);

struct LabeledUser {
    std::string user_id;
    std::string msa_id;
    corpus::TokenCounts token_counts;
    std::int64_t messages = 0;
};

struct CvConfig {
    std::size_t folds = 10;
    std::vector<double> lambda_grid{0.01, 0.1, 1.0, 10.0};
    std::uint64_t seed = 0;
    TrainConfig train;
};

struct Prediction {
    std::string user_id;
    std::string true_msa;
    std::string predicted_msa;
    std::size_t fold = 0;

    bool correct() const { return true_msa == predicted_msa; }
};

struct CvResult {
    std::vector<std::string> classes;      // sorted MSA ids
    std::vector<Prediction> predictions;   // input order
    std::vector<double> chosen_lambda;     // per test fold
    std::vector<std::vector<double>> dev_accuracy;  // [fold][grid index]
    std::vector<std::string> warnings;
};

/// User-level k-fold cross-validation. Folds are stratified by MSA: each
/// class's users (sorted by id, shuffled by a per-class stream) are dealt
/// round-robin. For test fold f the development fold is (f + 1) mod k;
/// lambda is the first grid value with the best development accuracy, and
/// the final model is retrained on training plus development users with a
/// vocabulary built from those users only.
CvResult cross_validate(const std::vector<LabeledUser>& users, const CvConfig& config);

/// Half-open bins [e_i, e_{i+1}) plus an overflow bin [e_last, inf).
class UsageBins {
public:
    /// 1, 10, 20, 40, 80, 160, 320.
    UsageBins();
    /// Throws ValidationError unless edges are strictly increasing and >= 1.
    explicit UsageBins(std::vector<std::int64_t> edges);

    std::size_t size() const noexcept { return edges_.size(); }
    const std::vector<std::int64_t>& edges() const noexcept { return edges_; }
    /// None below the first edge.
    std::optional<std::size_t> bin_of(std::int64_t messages) const;
    std::string label(std::size_t bin) const;

private:
    std::vector<std::int64_t> edges_;
};

/// Bin per user; users below the first edge get none and one warning each.
std::vector<std::optional<std::size_t>> usage_bins(std::span<const std::int64_t> message_counts,
                                                   const UsageBins& bins, std::vector<std::string>* warnings);

struct EvalRow {
    std::string stratum;
    std::string usage_bin;  // "all" for the pooled row of a stratum
    std::size_t n_users = 0;
    double weight = 0.0;  // sum of stratum weights (n_users for hard strata)
    std::optional<double> accuracy;
    std::optional<double> ci_lo;
    std::optional<double> ci_hi;
};

struct EvalTable {
    std::string panel;
    std::vector<EvalRow> rows;

    /// panel,stratum,usage_bin,n_users,weight,accuracy,ci_low,ci_high
    std::string to_csv(bool header = true) const;
};

/// Accuracy per (stratum, usage bin) and per stratum over all bins, in the
/// order of `strata` then bins. Each user contributes weight w[u][s] to
/// stratum s (one-hot for hard assignment). Cells with no weight get n = 0
/// and no accuracy; cells with fewer than two users get no interval.
/// Intervals are percentile bootstraps over the cell's users.
EvalTable stratified_accuracy(std::string panel, const std::vector<bool>& correct,
                              const std::vector<std::vector<double>>& weights,
                              const std::vector<std::string>& strata,
                              const std::vector<std::optional<std::size_t>>& bins, const UsageBins& usage,
                              const stats::BootstrapConfig& config);

/// Hard-assignment convenience: stratum label per user.
EvalTable stratified_accuracy(std::string panel, const std::vector<bool>& correct,
                              const std::vector<std::string>& stratum_of,
                              const std::vector<std::string>& strata,
                              const std::vector<std::optional<std::size_t>>& bins, const UsageBins& usage,
                              const stats::BootstrapConfig& config);

struct PredictionRow {
    Prediction prediction;
    std::string usage_bin;
    std::string gender_hat;
    std::string agebin_hat;
};

/// user_id,true_msa,predicted_msa,usage_bin,gender_hat,agebin_hat
std::string predictions_csv(const std::vector<PredictionRow>& rows);
std::vector<PredictionRow> parse_predictions_csv(std::string_view csv);

}  // namespace geolex::geoloc

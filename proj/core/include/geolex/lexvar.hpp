#pragma once

// Sparse additive log-odds deviations of a group's word distribution from a
// background distribution, salient-term extraction, annotated lexicons and
// lexicon-rate comparisons.

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geolex/corpus.hpp"

namespace geolex::lexvar {

/// Background log-probabilities over a sorted vocabulary.
struct Background {
    std::vector<std::string> vocabulary;
    std::vector<double> m;

    std::optional<std::size_t> index(std::string_view term) const;
    /// Group counts aligned to the vocabulary. Throws DataError for a term
    /// outside it.
    std::vector<double> align(const corpus::TokenCounts& counts) const;
};

/// m_w = log((c_w + alpha) / sum(c + alpha)) over terms with c_w > 0.
/// Throws DataError when no term has a positive count.
Background fit_background(const corpus::TokenCounts& counts, double alpha = 0.0);

struct SageConfig {
    double lambda = 3.0;  // L1 weight, in count units
    int max_iter = 10000;
    double tol = 1e-9;      // relative objective improvement
    double kkt_tol = 1e-6;  // gradient slack for the optimality check
};

/// Deviation vector for one group; only nonzero entries are stored.
struct SageResult {
    std::vector<std::pair<std::size_t, double>> eta;  // (vocabulary index, value), by index
    std::vector<double> objective_trace;
    double objective = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;

    std::vector<double> dense(std::size_t vocabulary_size) const;
    std::size_t nonzeros() const noexcept { return eta.size(); }
};

/// sum_w c_w log softmax(m + eta)_w - lambda * |eta|_1.
double sage_objective(std::span<const double> counts, std::span<const double> m, std::span<const double> eta,
                      double lambda);

/// Maximizes sage_objective by proximal gradient ascent with soft
/// thresholding, a diagonal metric C * p_w (C = total count) and backtracking.
/// Stops when the relative improvement falls below tol and every coordinate
/// satisfies the optimality conditions: |g_w| <= lambda + kkt_tol where
/// eta_w = 0, |g_w - lambda sign(eta_w)| <= kkt_tol otherwise, with
/// g = c - C softmax(m + eta). For lambda = 0 the result is shifted to sum
/// to zero. Throws ConvergenceError after max_iter iterations.
SageResult sage_fit(std::span<const double> counts, const Background& background, const SageConfig& config);
SageResult sage_fit(const corpus::TokenCounts& counts, const Background& background, const SageConfig& config);

struct RankedTerm {
    std::string term;
    double eta = 0.0;
};

struct TopTerms {
    std::vector<RankedTerm> terms;
    std::optional<std::string> warning;
};

/// The k largest positive deviations, ties by term. A warning is set when
/// fewer than k are positive.
TopTerms top_k(const SageResult& result, const Background& background, std::size_t k = 25);

/// group,rank,term,eta (rank from 1).
std::string salience_csv(const std::vector<std::pair<std::string, TopTerms>>& groups);

enum class Label { nonstandard_word, entity_name, other };

std::string_view to_string(Label label);
/// "Nonstandard-Word", "Entity-Name" or "Other". Throws DataError otherwise.
Label parse_label(std::string_view s);

/// Human-annotated term labels.
class AnnotatedLexicon {
public:
    AnnotatedLexicon() = default;

    /// CSV with columns term,label. Duplicate terms with conflicting labels
    /// are a DataError.
    static AnnotatedLexicon parse_csv(std::string_view csv);
    static AnnotatedLexicon load(const std::string& path);

    void set(std::string term, Label label);
    std::optional<Label> label(std::string_view term) const;
    std::set<std::string> terms(Label label) const;
    std::size_t size() const noexcept { return labels_.size(); }
    std::string to_csv() const;

private:
    std::map<std::string, Label, std::less<>> labels_;
};

struct LexiconRate {
    std::int64_t lexicon_tokens = 0;
    std::int64_t total_tokens = 0;
    double rate = 0.0;
    /// Every lexicon term's count / total_tokens, including zeros.
    std::map<std::string, double> per_term;
};

/// Fraction of tokens that belong to the lexicon. Throws DataError for an
/// empty sample.
LexiconRate lexicon_rate(const corpus::TokenCounts& sample, const std::set<std::string>& terms);

struct TTest {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;  // two-sided
    double mean_diff = 0.0;
    std::size_t n = 0;
};

/// t = mean(d) / (sd(d) / sqrt(n)), df = n - 1. Throws DataError for fewer
/// than two differences and DomainError when they have zero variance.
TTest paired_t(std::span<const double> differences);
TTest paired_t(std::span<const double> a, std::span<const double> b);

}  // namespace geolex::lexvar

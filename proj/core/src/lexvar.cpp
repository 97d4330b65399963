#include "geolex/lexvar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "geolex/csv.hpp"
#include "geolex/error.hpp"
#include "geolex/stats.hpp"

namespace geolex::lexvar {

std::optional<std::size_t> Background::index(std::string_view term) const {
    const auto it = std::lower_bound(vocabulary.begin(), vocabulary.end(), term);
    if (it == vocabulary.end() || *it != term) return std::nullopt;
    return static_cast<std::size_t>(it - vocabulary.begin());
}

std::vector<double> Background::align(const corpus::TokenCounts& counts) const {
    std::vector<double> out(vocabulary.size(), 0.0);
    for (const auto& [w, c] : counts) {
        if (c == 0) continue;
        if (c < 0) throw DataError("negative count for term '" + w + "'");
        const auto idx = index(w);
        if (!idx) throw DataError("term '" + w + "' is not in the background vocabulary");
        out[*idx] = static_cast<double>(c);
    }
    return out;
}

Background fit_background(const corpus::TokenCounts& counts, double alpha) {
    if (!(alpha >= 0.0)) throw ValidationError("background smoothing must be non-negative");
    Background bg;
    double total = 0.0;
    for (const auto& [w, c] : counts) {
        if (c < 0) throw DataError("negative count for term '" + w + "'");
        if (c == 0) continue;
        bg.vocabulary.push_back(w);
        bg.m.push_back(static_cast<double>(c) + alpha);
        total += static_cast<double>(c) + alpha;
    }
    if (bg.vocabulary.empty()) throw DataError("background vocabulary is empty");
    for (auto& v : bg.m) v = std::log(v / total);
    return bg;
}

std::vector<double> SageResult::dense(std::size_t vocabulary_size) const {
    std::vector<double> out(vocabulary_size, 0.0);
    for (const auto& [i, v] : eta) out.at(i) = v;
    return out;
}

namespace {

/// Log-likelihood part and softmax(m + eta) in `p`.
double log_likelihood(std::span<const double> counts, std::span<const double> m, std::span<const double> eta,
                      double total, std::vector<double>& p) {
    const std::size_t n = m.size();
    p.resize(n);
    for (std::size_t w = 0; w < n; ++w) p[w] = m[w] + eta[w];
    const double lse = stats::log_sum_exp(p);
    double ll = -total * lse;
    for (std::size_t w = 0; w < n; ++w) {
        if (counts[w] != 0.0) ll += counts[w] * (m[w] + eta[w]);
        p[w] = std::exp(p[w] - lse);
    }
    return ll;
}

double l1(std::span<const double> v) {
    double s = 0.0;
    for (const double x : v) s += std::abs(x);
    return s;
}

double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

double kkt_residual(std::span<const double> grad, std::span<const double> eta, double lambda) {
    double r = 0.0;
    for (std::size_t w = 0; w < eta.size(); ++w) {
        const double v = eta[w] == 0.0 ? std::max(0.0, std::abs(grad[w]) - lambda)
                                       : std::abs(grad[w] - (eta[w] > 0.0 ? lambda : -lambda));
        r = std::max(r, v);
    }
    return r;
}

}  // namespace

double sage_objective(std::span<const double> counts, std::span<const double> m, std::span<const double> eta,
                      double lambda) {
    if (counts.size() != m.size() || eta.size() != m.size()) throw DomainError("SAGE vector sizes differ");
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    std::vector<double> p;
    return log_likelihood(counts, m, eta, total, p) - lambda * l1(eta);
}

SageResult sage_fit(std::span<const double> counts, const Background& background, const SageConfig& config) {
    const auto& m = background.m;
    const std::size_t n = m.size();
    if (counts.size() != n) throw DomainError("group counts do not match the background vocabulary");
    if (!(config.lambda >= 0.0)) throw ValidationError("SAGE lambda must be non-negative");
    if (config.max_iter < 1) throw ValidationError("SAGE max_iter must be at least 1");
    for (const double c : counts) {
        if (!(c >= 0.0)) throw DataError("group counts must be non-negative");
    }
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    if (!(total > 0.0)) throw DataError("group has no tokens");
    const double lambda = config.lambda;

    std::vector<double> eta(n, 0.0);
    std::vector<double> p;
    std::vector<double> p_next;
    std::vector<double> grad(n);
    std::vector<double> d(n);
    std::vector<double> next(n);
    double ll = log_likelihood(counts, m, eta, total, p);
    double obj = ll;

    SageResult out;
    out.objective_trace.push_back(obj);
    const double d_floor = 1e-12 * std::max(total, 1.0);
    for (int it = 1; it <= config.max_iter; ++it) {
        for (std::size_t w = 0; w < n; ++w) {
            grad[w] = counts[w] - total * p[w];
            d[w] = std::max(total * p[w], d_floor);
        }
        double beta = 1.0;
        double ll_next = 0.0;
        bool accepted = false;
        for (int bt = 0; bt < 200; ++bt) {
            double lin = 0.0;
            double quad = 0.0;
            for (std::size_t w = 0; w < n; ++w) {
                const double dw = beta * d[w];
                next[w] = soft_threshold(eta[w] + grad[w] / dw, lambda / dw);
                const double step = next[w] - eta[w];
                lin += grad[w] * step;
                quad += dw * step * step;
            }
            ll_next = log_likelihood(counts, m, next, total, p_next);
            const double slack = 1e-12 * std::max(1.0, std::abs(ll));
            if (ll_next >= ll + lin - 0.5 * quad - slack) {
                accepted = true;
                break;
            }
            beta *= 2.0;
        }
        if (!accepted) {
            throw ConvergenceError("SAGE line search failed at iteration " + std::to_string(it),
                                   out.objective_trace);
        }
        const double obj_next = ll_next - lambda * l1(next);
        const double improvement = obj_next - obj;
        eta.swap(next);
        p.swap(p_next);
        ll = ll_next;
        obj = obj_next;
        out.objective_trace.push_back(obj);
        out.iterations = it;

        if (std::abs(improvement) < config.tol * std::max(std::abs(obj), 1e-300)) {
            for (std::size_t w = 0; w < n; ++w) grad[w] = counts[w] - total * p[w];
            const double kkt = kkt_residual(grad, eta, lambda);
            if (kkt <= config.kkt_tol) {
                out.kkt_residual = kkt;
                if (lambda == 0.0) {
                    const double shift = std::accumulate(eta.begin(), eta.end(), 0.0) / static_cast<double>(n);
                    for (auto& v : eta) v -= shift;
                }
                out.objective = obj;
                for (std::size_t w = 0; w < n; ++w) {
                    if (eta[w] != 0.0) out.eta.emplace_back(w, eta[w]);
                }
                return out;
            }
        }
    }
    throw ConvergenceError("SAGE did not converge in " + std::to_string(config.max_iter) + " iterations",
                           out.objective_trace);
}

SageResult sage_fit(const corpus::TokenCounts& counts, const Background& background, const SageConfig& config) {
    const auto aligned = background.align(counts);
    return sage_fit(std::span<const double>(aligned), background, config);
}

TopTerms top_k(const SageResult& result, const Background& background, std::size_t k) {
    TopTerms out;
    for (const auto& [i, v] : result.eta) {
        if (v > 0.0) out.terms.push_back({background.vocabulary.at(i), v});
    }
    std::sort(out.terms.begin(), out.terms.end(), [](const RankedTerm& a, const RankedTerm& b) {
        if (a.eta != b.eta) return a.eta > b.eta;
        return a.term < b.term;
    });
    if (out.terms.size() > k) out.terms.resize(k);
    if (out.terms.size() < k) {
        out.warning = "only " + std::to_string(out.terms.size()) + " of " + std::to_string(k) +
                      " requested terms have positive deviation";
    }
    return out;
}

std::string salience_csv(const std::vector<std::pair<std::string, TopTerms>>& groups) {
    std::string out = "group,rank,term,eta\n";
    for (const auto& [group, top] : groups) {
        for (std::size_t r = 0; r < top.terms.size(); ++r) {
            out += csv::join({group, std::to_string(r + 1), top.terms[r].term, csv::format_double(top.terms[r].eta)});
            out += '\n';
        }
    }
    return out;
}

std::string_view to_string(Label label) {
    switch (label) {
    case Label::nonstandard_word: return "Nonstandard-Word";
    case Label::entity_name: return "Entity-Name";
    case Label::other: return "Other";
    }
    return "Other";
}

Label parse_label(std::string_view s) {
    if (s == "Nonstandard-Word") return Label::nonstandard_word;
    if (s == "Entity-Name") return Label::entity_name;
    if (s == "Other") return Label::other;
    throw DataError("unknown lexicon label '" + std::string(s) +
                    "' (expected Nonstandard-Word, Entity-Name or Other)");
}

AnnotatedLexicon AnnotatedLexicon::parse_csv(std::string_view text) {
    const auto rows = csv::parse(text);
    if (rows.empty()) throw DataError("lexicon file is empty");
    const std::size_t term_col = csv::column(rows[0], "term", "lexicon");
    const std::size_t label_col = csv::column(rows[0], "label", "lexicon");
    AnnotatedLexicon lex;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.size() <= std::max(term_col, label_col)) {
            throw DataError("lexicon row " + std::to_string(i + 1) + " is short");
        }
        const Label label = parse_label(row[label_col]);
        const auto existing = lex.label(row[term_col]);
        if (existing && *existing != label) {
            throw DataError("lexicon term '" + row[term_col] + "' has conflicting labels");
        }
        lex.set(row[term_col], label);
    }
    return lex;
}

AnnotatedLexicon AnnotatedLexicon::load(const std::string& path) { return parse_csv(csv::read_file(path)); }

void AnnotatedLexicon::set(std::string term, Label label) {
    if (term.empty()) throw DataError("empty lexicon term");
    labels_[std::move(term)] = label;
}

std::optional<Label> AnnotatedLexicon::label(std::string_view term) const {
    const auto it = labels_.find(term);
    if (it == labels_.end()) return std::nullopt;
    return it->second;
}

std::set<std::string> AnnotatedLexicon::terms(Label label) const {
    std::set<std::string> out;
    for (const auto& [t, l] : labels_) {
        if (l == label) out.insert(t);
    }
    return out;
}

std::string AnnotatedLexicon::to_csv() const {
    std::string out = "term,label\n";
    for (const auto& [t, l] : labels_) out += csv::join({t, std::string(to_string(l))}) + "\n";
    return out;
}

LexiconRate lexicon_rate(const corpus::TokenCounts& sample, const std::set<std::string>& terms) {
    LexiconRate r;
    for (const auto& [w, c] : sample) r.total_tokens += c;
    if (r.total_tokens <= 0) throw DataError("sample has no tokens");
    const auto total = static_cast<double>(r.total_tokens);
    for (const auto& t : terms) {
        const auto it = sample.find(t);
        const std::int64_t c = it == sample.end() ? 0 : it->second;
        r.lexicon_tokens += c;
        r.per_term[t] = static_cast<double>(c) / total;
    }
    r.rate = static_cast<double>(r.lexicon_tokens) / total;
    return r;
}

TTest paired_t(std::span<const double> differences) {
    const std::size_t n = differences.size();
    if (n < 2) throw DataError("paired t-test needs at least two pairs");
    TTest out;
    out.n = n;
    out.mean_diff = stats::mean(differences);
    const double var = stats::sample_variance(differences);
    if (!(var > 0.0)) throw DomainError("paired differences have zero variance");
    out.t = out.mean_diff / std::sqrt(var / static_cast<double>(n));
    out.df = static_cast<double>(n - 1);
    out.p = stats::student_t_two_sided_p(out.t, out.df);
    return out;
}

TTest paired_t(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DataError("paired samples differ in length");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return paired_t(std::span<const double>(d));
}

}  // namespace geolex::lexvar

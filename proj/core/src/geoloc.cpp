#include "geolex/geoloc.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <set>

#include "geolex/csv.hpp"
#include "geolex/error.hpp"

namespace geolex::geoloc {

Vocabulary::Vocabulary(std::vector<std::string> terms) : terms_(std::move(terms)) {
    std::sort(terms_.begin(), terms_.end());
    terms_.erase(std::unique(terms_.begin(), terms_.end()), terms_.end());
}

Vocabulary Vocabulary::from_counts(std::span<const corpus::TokenCounts* const> documents) {
    std::set<std::string> terms;
    for (const auto* doc : documents) {
        for (const auto& [w, c] : *doc) {
            if (c > 0) terms.insert(w);
        }
    }
    Vocabulary v;
    v.terms_.assign(terms.begin(), terms.end());
    return v;
}

std::optional<std::size_t> Vocabulary::index(std::string_view term) const {
    const auto it = std::lower_bound(terms_.begin(), terms_.end(), term);
    if (it == terms_.end() || *it != term) return std::nullopt;
    return static_cast<std::size_t>(it - terms_.begin());
}

SparseVector featurize(const corpus::TokenCounts& counts, const Vocabulary& vocabulary) {
    SparseVector v;
    for (const auto& [w, c] : counts) {
        if (c == 0) continue;
        if (const auto idx = vocabulary.index(w)) {
            v.entries.emplace_back(static_cast<std::uint32_t>(*idx), static_cast<double>(c));
        }
    }
    std::sort(v.entries.begin(), v.entries.end());
    return v;
}

GeoClassifier::GeoClassifier(std::size_t classes, std::size_t features, double lambda)
    : classes_(classes), features_(features), lambda_(lambda), params_(classes * features + classes, 0.0) {}

namespace {

void scores_into(std::span<const double> params, std::size_t classes, std::size_t features, const SparseVector& x,
                 std::vector<double>& out) {
    out.assign(classes, 0.0);
    for (std::size_t k = 0; k < classes; ++k) {
        double s = params[classes * features + k];
        const double* row = params.data() + k * features;
        for (const auto& [j, v] : x.entries) s += row[j] * v;
        out[k] = s;
    }
}

void softmax_in_place(std::vector<double>& s) {
    const double mx = *std::max_element(s.begin(), s.end());
    double z = 0.0;
    for (auto& v : s) {
        v = std::exp(v - mx);
        z += v;
    }
    for (auto& v : s) v /= z;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm_inf(std::span<const double> a) {
    double m = 0.0;
    for (const double v : a) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace

std::vector<double> GeoClassifier::scores(const SparseVector& x) const {
    for (const auto& [j, v] : x.entries) {
        if (j >= features_) throw DomainError("feature index outside the classifier");
    }
    std::vector<double> s;
    scores_into(params_, classes_, features_, x, s);
    return s;
}

std::vector<double> GeoClassifier::probabilities(const SparseVector& x) const {
    auto s = scores(x);
    softmax_in_place(s);
    return s;
}

std::size_t GeoClassifier::predict(const SparseVector& x) const {
    const auto s = scores(x);
    return static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
}

double objective(const Dataset& data, double lambda, std::span<const double> params, std::span<double> grad) {
    const std::size_t K = data.classes;
    const std::size_t F = data.features;
    if (params.size() != K * F + K || grad.size() != params.size()) {
        throw DomainError("parameter vector does not match the dataset shape");
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    double f = 0.0;
    std::vector<double> s;
    for (std::size_t i = 0; i < data.x.size(); ++i) {
        const auto& x = data.x[i];
        scores_into(params, K, F, x, s);
        const double mx = *std::max_element(s.begin(), s.end());
        double z = 0.0;
        for (const double v : s) z += std::exp(v - mx);
        const double lse = mx + std::log(z);
        f += lse - s[data.y[i]];
        for (std::size_t k = 0; k < K; ++k) {
            const double r = std::exp(s[k] - lse) - (k == data.y[i] ? 1.0 : 0.0);
            if (r == 0.0) continue;
            double* g = grad.data() + k * F;
            for (const auto& [j, v] : x.entries) g[j] += r * v;
            grad[K * F + k] += r;
        }
    }
    for (std::size_t p = 0; p < K * F; ++p) {
        f += 0.5 * lambda * params[p] * params[p];
        grad[p] += lambda * params[p];
    }
    return f;
}

GeoClassifier train(const Dataset& data, const TrainConfig& config) {
    if (!(config.lambda > 0.0)) throw ValidationError("ridge penalty must be positive");
    if (data.classes < 2) throw DataError("classification needs at least two classes");
    if (data.x.size() != data.y.size()) throw DataError("features and labels differ in length");
    std::vector<std::size_t> per_class(data.classes, 0);
    for (const auto y : data.y) {
        if (y >= data.classes) throw DataError("label outside the class range");
        ++per_class[y];
    }
    for (std::size_t k = 0; k < data.classes; ++k) {
        if (per_class[k] == 0) {
            throw DataError("class " + std::to_string(k) + " has no training example; use a larger sample");
        }
    }
    for (const auto& x : data.x) {
        for (const auto& [j, v] : x.entries) {
            if (j >= data.features) throw DataError("feature index outside the vocabulary");
        }
    }

    GeoClassifier model(data.classes, data.features, config.lambda);
    auto& x = model.parameters();
    const std::size_t P = x.size();
    // Log class frequencies: the bias optimum at W = 0.
    for (std::size_t k = 0; k < data.classes; ++k) {
        x[data.classes * data.features + k] =
            std::log(static_cast<double>(per_class[k]) / static_cast<double>(data.y.size()));
    }
    std::vector<double> g(P);
    std::vector<double> g_new(P);
    std::vector<double> x_new(P);
    std::vector<double> d(P);
    double f = objective(data, config.lambda, x, g);
    model.objective_trace.push_back(f);

    std::deque<std::vector<double>> S;
    std::deque<std::vector<double>> Y;
    std::deque<double> rho;
    std::vector<double> alpha_buf;
    for (int it = 0; it < config.max_iter; ++it) {
        if (norm_inf(g) <= 1e-12 * std::max(1.0, std::abs(f))) {
            model.converged = true;
            break;
        }
        // Two-loop recursion: d = -H g.
        for (std::size_t p = 0; p < P; ++p) d[p] = -g[p];
        alpha_buf.assign(S.size(), 0.0);
        for (std::size_t m = S.size(); m-- > 0;) {
            alpha_buf[m] = rho[m] * dot(S[m], d);
            for (std::size_t p = 0; p < P; ++p) d[p] -= alpha_buf[m] * Y[m][p];
        }
        if (!S.empty()) {
            const double gamma = dot(S.back(), Y.back()) / dot(Y.back(), Y.back());
            for (auto& v : d) v *= gamma;
        } else {
            const double scale = 1.0 / std::max(1.0, std::sqrt(dot(g, g)));
            for (auto& v : d) v *= scale;
        }
        for (std::size_t m = 0; m < S.size(); ++m) {
            const double beta = rho[m] * dot(Y[m], d);
            for (std::size_t p = 0; p < P; ++p) d[p] += (alpha_buf[m] - beta) * S[m][p];
        }
        double gd = dot(g, d);
        if (!(gd < 0.0)) {
            S.clear();
            Y.clear();
            rho.clear();
            const double scale = 1.0 / std::max(1.0, std::sqrt(dot(g, g)));
            for (std::size_t p = 0; p < P; ++p) d[p] = -g[p] * scale;
            gd = dot(g, d);
        }

        double step = 1.0;
        double f_new = f;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            for (std::size_t p = 0; p < P; ++p) x_new[p] = x[p] + step * d[p];
            f_new = objective(data, config.lambda, x_new, g_new);
            if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * gd) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        std::vector<double> s(P);
        std::vector<double> y(P);
        for (std::size_t p = 0; p < P; ++p) {
            s[p] = x_new[p] - x[p];
            y[p] = g_new[p] - g[p];
        }
        const double sy = dot(s, y);
        if (sy > 1e-12 * std::sqrt(dot(s, s) * dot(y, y))) {
            S.push_back(std::move(s));
            Y.push_back(std::move(y));
            rho.push_back(1.0 / sy);
            if (static_cast<int>(S.size()) > config.history) {
                S.pop_front();
                Y.pop_front();
                rho.pop_front();
            }
        }
        const double rel = (f - f_new) / std::max(std::abs(f), 1e-300);
        x.swap(x_new);
        g.swap(g_new);
        f = f_new;
        model.objective_trace.push_back(f);
        if (rel < config.tol) {
            model.converged = true;
            break;
        }
    }
    return model;
}

namespace {

Dataset build_dataset(const std::vector<LabeledUser>& users, std::span<const std::size_t> idx,
                      const Vocabulary& vocab, const std::map<std::string, std::size_t>& class_of) {
    Dataset d;
    d.features = vocab.size();
    d.classes = class_of.size();
    d.x.reserve(idx.size());
    d.y.reserve(idx.size());
    for (const auto i : idx) {
        d.x.push_back(featurize(users[i].token_counts, vocab));
        d.y.push_back(class_of.at(users[i].msa_id));
    }
    return d;
}

Vocabulary vocab_of(const std::vector<LabeledUser>& users, std::span<const std::size_t> idx) {
    std::vector<const corpus::TokenCounts*> docs;
    docs.reserve(idx.size());
    for (const auto i : idx) docs.push_back(&users[i].token_counts);
    return Vocabulary::from_counts(docs);
}

void require_all_classes(const std::vector<LabeledUser>& users, std::span<const std::size_t> idx,
                         const std::vector<std::string>& classes, const std::string& what) {
    std::set<std::string> seen;
    for (const auto i : idx) seen.insert(users[i].msa_id);
    for (const auto& c : classes) {
        if (!seen.count(c)) {
            throw DataError(what + " has no user from MSA '" + c + "'; use a larger sample or fewer folds");
        }
    }
}

}  // namespace

CvResult cross_validate(const std::vector<LabeledUser>& users, const CvConfig& config) {
    const std::size_t k = config.folds;
    if (k < 3) throw ValidationError("cross-validation needs at least 3 folds");
    if (config.lambda_grid.empty()) throw ValidationError("lambda grid is empty");
    for (const double l : config.lambda_grid) {
        if (!(l > 0.0)) throw ValidationError("lambda grid values must be positive");
    }
    CvResult out;
    std::map<std::string, std::vector<std::size_t>> by_class;
    {
        std::set<std::string> ids;
        for (std::size_t i = 0; i < users.size(); ++i) {
            if (!ids.insert(users[i].user_id).second) {
                throw DataError("duplicate user '" + users[i].user_id + "' in geolocation input");
            }
            by_class[users[i].msa_id].push_back(i);
        }
    }
    if (by_class.size() < 2) throw DataError("geolocation needs users from at least two MSAs");
    std::map<std::string, std::size_t> class_of;
    for (const auto& [c, members] : by_class) {
        class_of[c] = out.classes.size();
        out.classes.push_back(c);
    }

    std::vector<std::size_t> fold_of(users.size(), 0);
    std::size_t dealt = 0;
    for (auto& [c, members] : by_class) {
        std::sort(members.begin(), members.end(),
                  [&](std::size_t a, std::size_t b) { return users[a].user_id < users[b].user_id; });
        stats::RngStream rng(config.seed, stats::fnv1a64("fold/" + c));
        rng.shuffle(members);
        for (const auto i : members) fold_of[i] = dealt++ % k;
    }

    out.predictions.resize(users.size());
    out.chosen_lambda.assign(k, 0.0);
    out.dev_accuracy.assign(k, std::vector<double>(config.lambda_grid.size(), 0.0));
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t dev = (f + 1) % k;
        std::vector<std::size_t> train_idx;
        std::vector<std::size_t> dev_idx;
        std::vector<std::size_t> test_idx;
        for (std::size_t i = 0; i < users.size(); ++i) {
            if (fold_of[i] == f) test_idx.push_back(i);
            else if (fold_of[i] == dev) dev_idx.push_back(i);
            else train_idx.push_back(i);
        }
        const std::string fold_name = "training portion of fold " + std::to_string(f);
        require_all_classes(users, train_idx, out.classes, fold_name);

        const Vocabulary tune_vocab = vocab_of(users, train_idx);
        const Dataset tune_train = build_dataset(users, train_idx, tune_vocab, class_of);
        const Dataset tune_dev = build_dataset(users, dev_idx, tune_vocab, class_of);
        double best_acc = -1.0;
        for (std::size_t l = 0; l < config.lambda_grid.size(); ++l) {
            TrainConfig tc = config.train;
            tc.lambda = config.lambda_grid[l];
            const GeoClassifier model = train(tune_train, tc);
            if (!model.converged) {
                out.warnings.push_back("fold " + std::to_string(f) + " lambda " + csv::format_double(tc.lambda) +
                                       ": training stopped before convergence");
            }
            std::size_t hits = 0;
            for (std::size_t i = 0; i < tune_dev.x.size(); ++i) {
                if (model.predict(tune_dev.x[i]) == tune_dev.y[i]) ++hits;
            }
            const double acc =
                tune_dev.x.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(tune_dev.x.size());
            out.dev_accuracy[f][l] = acc;
            if (acc > best_acc) {
                best_acc = acc;
                out.chosen_lambda[f] = tc.lambda;
            }
        }

        std::vector<std::size_t> fit_idx = train_idx;
        fit_idx.insert(fit_idx.end(), dev_idx.begin(), dev_idx.end());
        std::sort(fit_idx.begin(), fit_idx.end());
        const Vocabulary vocab = vocab_of(users, fit_idx);
        const Dataset fit = build_dataset(users, fit_idx, vocab, class_of);
        TrainConfig tc = config.train;
        tc.lambda = out.chosen_lambda[f];
        const GeoClassifier model = train(fit, tc);
        if (!model.converged) {
            out.warnings.push_back("fold " + std::to_string(f) + ": final training stopped before convergence");
        }
        for (const auto i : test_idx) {
            const auto pred = model.predict(featurize(users[i].token_counts, vocab));
            out.predictions[i] = {users[i].user_id, users[i].msa_id, out.classes[pred], f};
        }
    }
    return out;
}

UsageBins::UsageBins() : UsageBins(std::vector<std::int64_t>{1, 10, 20, 40, 80, 160, 320}) {}

UsageBins::UsageBins(std::vector<std::int64_t> edges) : edges_(std::move(edges)) {
    if (edges_.empty()) throw ValidationError("usage bin edges are empty");
    if (edges_[0] < 1) throw ValidationError("the first usage bin edge must be at least 1");
    for (std::size_t i = 1; i < edges_.size(); ++i) {
        if (edges_[i] <= edges_[i - 1]) throw ValidationError("usage bin edges must be strictly increasing");
    }
}

std::optional<std::size_t> UsageBins::bin_of(std::int64_t messages) const {
    if (messages < edges_[0]) return std::nullopt;
    const auto it = std::upper_bound(edges_.begin(), edges_.end(), messages);
    return static_cast<std::size_t>(it - edges_.begin()) - 1;
}

std::string UsageBins::label(std::size_t bin) const {
    if (bin + 1 >= edges_.size()) return std::to_string(edges_.at(bin)) + "+";
    return std::to_string(edges_[bin]) + "-" + std::to_string(edges_[bin + 1] - 1);
}

std::vector<std::optional<std::size_t>> usage_bins(std::span<const std::int64_t> message_counts,
                                                   const UsageBins& bins, std::vector<std::string>* warnings) {
    std::vector<std::optional<std::size_t>> out;
    out.reserve(message_counts.size());
    for (std::size_t i = 0; i < message_counts.size(); ++i) {
        out.push_back(bins.bin_of(message_counts[i]));
        if (!out.back() && warnings) {
            warnings->push_back("user " + std::to_string(i) + " has " + std::to_string(message_counts[i]) +
                                " messages and is excluded from usage bins");
        }
    }
    return out;
}

std::string EvalTable::to_csv(bool header) const {
    std::string out;
    if (header) out = "panel,stratum,usage_bin,n_users,weight,accuracy,ci_low,ci_high\n";
    auto opt = [](const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string(); };
    for (const auto& r : rows) {
        out += csv::join({panel, r.stratum, r.usage_bin, std::to_string(r.n_users), csv::format_double(r.weight),
                          opt(r.accuracy), opt(r.ci_lo), opt(r.ci_hi)});
        out += '\n';
    }
    return out;
}

namespace {

EvalRow eval_cell(const std::string& stratum, const std::string& bin_label, const std::vector<double>& w,
                  const std::vector<double>& c, const stats::BootstrapConfig& config) {
    EvalRow row;
    row.stratum = stratum;
    row.usage_bin = bin_label;
    row.n_users = w.size();
    row.weight = std::accumulate(w.begin(), w.end(), 0.0);
    if (w.empty() || !(row.weight > 0.0)) return row;
    auto stat = [&](std::span<const std::size_t> idx) {
        double num = 0.0;
        double den = 0.0;
        for (const auto i : idx) {
            num += w[i] * c[i];
            den += w[i];
        }
        return den > 0.0 ? num / den : 0.0;
    };
    std::vector<std::size_t> identity(w.size());
    std::iota(identity.begin(), identity.end(), std::size_t{0});
    row.accuracy = stat(identity);
    if (w.size() >= 2) {
        stats::BootstrapConfig cfg = config;
        cfg.seed = stats::stream_seed(config.seed, stats::fnv1a64(stratum + "/" + bin_label));
        const auto ci = stats::bootstrap_ci(w.size(), stat, cfg);
        row.ci_lo = std::min(ci.lo, *row.accuracy);
        row.ci_hi = std::max(ci.hi, *row.accuracy);
    }
    return row;
}

}  // namespace

EvalTable stratified_accuracy(std::string panel, const std::vector<bool>& correct,
                              const std::vector<std::vector<double>>& weights,
                              const std::vector<std::string>& strata,
                              const std::vector<std::optional<std::size_t>>& bins, const UsageBins& usage,
                              const stats::BootstrapConfig& config) {
    const std::size_t n = correct.size();
    if (weights.size() != n || bins.size() != n) throw DataError("stratified accuracy inputs differ in length");
    config.validate();
    EvalTable table;
    table.panel = std::move(panel);
    for (std::size_t s = 0; s < strata.size(); ++s) {
        std::vector<std::vector<double>> cell_w(usage.size());
        std::vector<std::vector<double>> cell_c(usage.size());
        std::vector<double> all_w;
        std::vector<double> all_c;
        for (std::size_t u = 0; u < n; ++u) {
            if (weights[u].size() != strata.size()) throw DataError("stratum weights do not match the strata");
            const double w = weights[u][s];
            if (!(w >= 0.0)) throw DomainError("negative stratum weight");
            if (w == 0.0 || !bins[u]) continue;
            const double c = correct[u] ? 1.0 : 0.0;
            cell_w[*bins[u]].push_back(w);
            cell_c[*bins[u]].push_back(c);
            all_w.push_back(w);
            all_c.push_back(c);
        }
        for (std::size_t b = 0; b < usage.size(); ++b) {
            table.rows.push_back(eval_cell(strata[s], usage.label(b), cell_w[b], cell_c[b], config));
        }
        table.rows.push_back(eval_cell(strata[s], "all", all_w, all_c, config));
    }
    return table;
}

EvalTable stratified_accuracy(std::string panel, const std::vector<bool>& correct,
                              const std::vector<std::string>& stratum_of,
                              const std::vector<std::string>& strata,
                              const std::vector<std::optional<std::size_t>>& bins, const UsageBins& usage,
                              const stats::BootstrapConfig& config) {
    if (stratum_of.size() != correct.size()) throw DataError("stratified accuracy inputs differ in length");
    std::vector<std::vector<double>> weights(correct.size(), std::vector<double>(strata.size(), 0.0));
    for (std::size_t u = 0; u < correct.size(); ++u) {
        const auto it = std::find(strata.begin(), strata.end(), stratum_of[u]);
        if (it == strata.end()) throw DataError("user has unknown stratum '" + stratum_of[u] + "'");
        weights[u][static_cast<std::size_t>(it - strata.begin())] = 1.0;
    }
    return stratified_accuracy(std::move(panel), correct, weights, strata, bins, usage, config);
}

std::string predictions_csv(const std::vector<PredictionRow>& rows) {
    std::string out = "user_id,true_msa,predicted_msa,usage_bin,gender_hat,agebin_hat\n";
    for (const auto& r : rows) {
        out += csv::join({r.prediction.user_id, r.prediction.true_msa, r.prediction.predicted_msa, r.usage_bin,
                          r.gender_hat, r.agebin_hat});
        out += '\n';
    }
    return out;
}

std::vector<PredictionRow> parse_predictions_csv(std::string_view text) {
    const auto rows = csv::parse(text);
    if (rows.empty()) throw DataError("predictions file is empty");
    const auto& h = rows[0];
    const std::size_t cu = csv::column(h, "user_id", "predictions");
    const std::size_t ct = csv::column(h, "true_msa", "predictions");
    const std::size_t cp = csv::column(h, "predicted_msa", "predictions");
    const std::size_t cb = csv::column(h, "usage_bin", "predictions");
    const std::size_t cg = csv::column(h, "gender_hat", "predictions");
    const std::size_t ca = csv::column(h, "agebin_hat", "predictions");
    const std::size_t width = std::max({cu, ct, cp, cb, cg, ca}) + 1;
    std::vector<PredictionRow> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() < width) throw DataError("predictions row " + std::to_string(i + 1) + " is short");
        PredictionRow row;
        row.prediction.user_id = r[cu];
        row.prediction.true_msa = r[ct];
        row.prediction.predicted_msa = r[cp];
        row.usage_bin = r[cb];
        row.gender_hat = r[cg];
        row.agebin_hat = r[ca];
        out.push_back(std::move(row));
    }
    return out;
}

}  // namespace geolex::geoloc

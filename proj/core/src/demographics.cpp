#include "geolex/demographics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <regex>
#include <set>
#include <unordered_map>

#include "geolex/csv.hpp"
#include "geolex/error.hpp"
#include "geolex/text.hpp"

namespace geolex::demographics {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

}  // namespace

void NameDemographics::add(std::string_view name, Sex sex, int birth_year, std::int64_t count) {
    if (count < 0) throw DataError("negative birth count for name '" + std::string(name) + "'");
    const std::string key = text::lowercase(text::trim(name));
    if (key.empty()) throw DataError("empty name in birth records");
    const int age = collection_year_ - birth_year;
    if (age < 0 || age > kMaxAge) {
        out_of_range_ += count;
        return;
    }
    auto it = names_.find(key);
    if (it == names_.end()) it = names_.emplace(key, NameRecord{}).first;
    const auto s = static_cast<std::size_t>(sex);
    it->second.by_age[s][static_cast<std::size_t>(age)] += count;
    it->second.by_sex[s] += count;
    total_ += count;
}

const NameRecord* NameDemographics::find(std::string_view name) const {
    const auto it = names_.find(text::lowercase(text::trim(name)));
    return it == names_.end() ? nullptr : &it->second;
}

std::int64_t NameDemographics::name_total(std::string_view name) const {
    const NameRecord* r = find(name);
    return r ? r->total() : 0;
}

NameDemographics load_name_tables(const std::string& directory, int collection_year) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(directory, ec)) throw IoError("name table directory not found: " + directory);
    std::vector<std::pair<int, fs::path>> files;
    const std::regex year_re("(\\d{4})");
    for (const auto& entry : fs::directory_iterator(directory)) {
        if (!entry.is_regular_file()) continue;
        const std::string fname = entry.path().filename().string();
        std::smatch m;
        if (!std::regex_search(fname, m, year_re)) continue;
        files.emplace_back(std::stoi(m[1].str()), entry.path());
    }
    if (files.empty()) throw DataError("no per-year name tables in " + directory);
    std::sort(files.begin(), files.end());

    NameDemographics nd(collection_year);
    for (const auto& [year, path] : files) {
        const auto rows = csv::parse(csv::read_file(path.string()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& row = rows[i];
            const std::string where = path.filename().string() + " row " + std::to_string(i + 1);
            if (i == 0 && !row.empty() && text::lowercase(row[0]) == "name") continue;
            if (row.size() != 3) throw DataError(where + ": expected name,sex,count");
            Sex sex;
            if (row[1] == "F" || row[1] == "f") {
                sex = Sex::female;
            } else if (row[1] == "M" || row[1] == "m") {
                sex = Sex::male;
            } else {
                throw DataError(where + ": sex must be F or M");
            }
            std::int64_t count = 0;
            try {
                std::size_t used = 0;
                count = std::stoll(row[2], &used);
                if (used != row[2].size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw DataError(where + ": count is not an integer");
            }
            nd.add(row[0], sex, year, count);
        }
    }
    if (nd.size() == 0) throw DataError("name tables in " + directory + " contain no births in the age range");
    return nd;
}

double AgeDistribution::expected_age() const {
    double e = 0.0;
    for (std::size_t a = 0; a < p.size(); ++a) e += static_cast<double>(a) * p[a];
    return e;
}

std::optional<AgeDistribution> name_age_dist(std::string_view name, const NameDemographics& nd) {
    const NameRecord* r = nd.find(name);
    if (!r || r->total() == 0) return std::nullopt;
    AgeDistribution d;
    const auto total = static_cast<double>(r->total());
    for (std::size_t a = 0; a < static_cast<std::size_t>(kNumAges); ++a) {
        d.p[a] = static_cast<double>(r->by_age[0][a] + r->by_age[1][a]) / total;
    }
    return d;
}

std::optional<double> name_gender(std::string_view name, const NameDemographics& nd) {
    const NameRecord* r = nd.find(name);
    if (!r || r->total() == 0) return std::nullopt;
    return static_cast<double>(r->by_sex[0]) / static_cast<double>(r->total());
}

SampleAgeResult sample_age_dist(std::span<const std::string> names, const NameDemographics& nd) {
    SampleAgeResult out;
    for (const auto& n : names) {
        const auto d = name_age_dist(n, nd);
        if (!d) {
            ++out.skipped;
            continue;
        }
        ++out.resolved;
        for (std::size_t a = 0; a < d->p.size(); ++a) out.distribution.p[a] += d->p[a];
    }
    if (out.resolved == 0) throw DataError("no user name resolves in the birth records");
    for (auto& v : out.distribution.p) v /= static_cast<double>(out.resolved);
    return out;
}

RareNameReport filter_rare_names(const std::vector<NamedUser>& users, const NameDemographics& nd,
                                 double ratio) {
    if (!(ratio > 0.0)) throw ValidationError("rare-name ratio must be positive");
    RareNameReport rep;
    if (users.empty()) return rep;
    if (nd.total_count() == 0) throw DataError("birth records are empty");

    std::unordered_map<std::string, std::int64_t> corpus_counts;
    for (const auto& u : users) ++corpus_counts[text::lowercase(u.name)];
    const auto n_users = static_cast<double>(users.size());
    const auto nd_total = static_cast<double>(nd.total_count());

    std::int64_t all_messages = 0;
    std::int64_t dropped_messages = 0;
    for (const auto& u : users) {
        all_messages += u.messages;
        const std::string key = text::lowercase(u.name);
        const std::int64_t in_nd = key.empty() ? 0 : nd.name_total(key);
        bool drop = false;
        if (in_nd == 0) {
            ++rep.dropped_absent;
            drop = true;
        } else {
            const double corpus_rf = static_cast<double>(corpus_counts[key]) / n_users;
            const double nd_rf = static_cast<double>(in_nd) / nd_total;
            if (corpus_rf >= ratio * nd_rf) {
                ++rep.dropped_rare;
                drop = true;
            }
        }
        if (drop) {
            dropped_messages += u.messages;
            rep.dropped.push_back(u);
        } else {
            rep.kept.push_back(u);
        }
    }
    rep.user_fraction_dropped = static_cast<double>(rep.dropped.size()) / n_users;
    rep.message_fraction_dropped =
        all_messages > 0 ? static_cast<double>(dropped_messages) / static_cast<double>(all_messages) : 0.0;
    return rep;
}

namespace {

stats::Interval bootstrap_per_user(std::span<const std::string> names, const NameDemographics& nd,
                                   const stats::BootstrapConfig& config, bool age) {
    std::vector<double> values;
    values.reserve(names.size());
    for (const auto& n : names) {
        if (age) {
            if (const auto d = name_age_dist(n, nd)) values.push_back(d->expected_age());
        } else if (const auto f = name_gender(n, nd)) {
            values.push_back(*f);
        }
    }
    if (values.empty()) throw DataError("no user name resolves in the birth records");
    if (values.size() == 1) return {values[0], values[0], values[0]};
    return stats::bootstrap_mean_ci(values, config);
}

}  // namespace

stats::Interval expected_age(std::span<const std::string> names, const NameDemographics& nd,
                             const stats::BootstrapConfig& config) {
    return bootstrap_per_user(names, nd, config, true);
}

stats::Interval female_share(std::span<const std::string> names, const NameDemographics& nd,
                             const stats::BootstrapConfig& config) {
    return bootstrap_per_user(names, nd, config, false);
}

AgeBins::AgeBins() : AgeBins(std::vector<AgeBin>{{0, 17}, {18, 29}, {30, 39}, {40, kMaxAge}}) {}

AgeBins::AgeBins(std::vector<AgeBin> bins) : bins_(std::move(bins)) {
    if (bins_.empty()) throw ValidationError("age bins are empty");
    int next = 0;
    for (const auto& b : bins_) {
        if (b.lo != next || b.hi < b.lo) {
            throw ValidationError("age bins must be ordered, contiguous and non-empty starting at 0");
        }
        next = b.hi + 1;
    }
    if (next != kMaxAge + 1) throw ValidationError("age bins must end at " + std::to_string(kMaxAge));
}

std::size_t AgeBins::bin_of(int age) const {
    if (age < 0 || age > kMaxAge) throw DomainError("age " + std::to_string(age) + " outside [0, 95]");
    for (std::size_t i = 0; i < bins_.size(); ++i) {
        if (age <= bins_[i].hi) return i;
    }
    return bins_.size() - 1;
}

std::string AgeBins::label(std::size_t i) const {
    const auto& b = bins_.at(i);
    if (b.hi == kMaxAge && b.lo > 0) return std::to_string(b.lo) + "+";
    return std::to_string(b.lo) + "-" + std::to_string(b.hi);
}

std::optional<Sex> DemographicModel::cell_sex(std::size_t cell) const noexcept {
    if (!joint_gender) return std::nullopt;
    return cell % 2 == 0 ? Sex::female : Sex::male;
}

std::string DemographicModel::cell_label(std::size_t cell) const {
    std::string s = bins.label(cell_bin(cell));
    if (const auto sex = cell_sex(cell)) s += *sex == Sex::female ? "/F" : "/M";
    return s;
}

std::optional<std::size_t> DemographicModel::name_index(std::string_view name) const {
    const std::string key = text::lowercase(name);
    const auto it = std::lower_bound(names.begin(), names.end(), key);
    if (it == names.end() || *it != key) return std::nullopt;
    return static_cast<std::size_t>(it - names.begin());
}

std::optional<std::size_t> DemographicModel::word_index(std::string_view word) const {
    const auto it = std::lower_bound(vocabulary.begin(), vocabulary.end(), word);
    if (it == vocabulary.end() || *it != word) return std::nullopt;
    return static_cast<std::size_t>(it - vocabulary.begin());
}

PhiTable build_phi(const NameDemographics& nd, const AgeBins& bins, bool joint_gender, double alpha) {
    if (!(alpha >= 0.0)) throw ValidationError("phi smoothing must be non-negative");
    const std::size_t genders = joint_gender ? 2 : 1;
    const std::size_t cells = bins.size() * genders;
    PhiTable t;
    t.names.reserve(nd.size());
    for (const auto& [name, rec] : nd.names()) t.names.push_back(name);
    t.phi.assign(cells, std::vector<double>(t.names.size(), alpha));
    std::size_t j = 0;
    for (const auto& [name, rec] : nd.names()) {
        for (std::size_t s = 0; s < 2; ++s) {
            const std::size_t g = joint_gender ? s : 0;
            for (int age = 0; age <= kMaxAge; ++age) {
                const auto c = rec.by_age[s][static_cast<std::size_t>(age)];
                if (c != 0) t.phi[bins.bin_of(age) * genders + g][j] += static_cast<double>(c);
            }
        }
        ++j;
    }
    for (std::size_t c = 0; c < cells; ++c) {
        const double z = std::accumulate(t.phi[c].begin(), t.phi[c].end(), 0.0);
        if (!(z > 0.0)) {
            throw DataError("no births fall in demographic cell " + std::to_string(c) +
                            "; use phi smoothing or wider age bins");
        }
        for (auto& v : t.phi[c]) v /= z;
    }
    return t;
}

namespace {

using SparseCounts = std::vector<std::pair<std::size_t, double>>;

SparseCounts to_sparse(const corpus::TokenCounts& counts, const DemographicModel& model) {
    SparseCounts out;
    for (const auto& [w, c] : counts) {
        if (c <= 0) continue;
        if (const auto idx = model.word_index(w)) out.emplace_back(*idx, static_cast<double>(c));
    }
    return out;
}

/// Unnormalized log posterior per cell. Returns false when the name term fell
/// back to uniform.
bool log_joint(const DemographicModel& m, const std::vector<std::vector<double>>& log_theta,
               std::optional<std::size_t> name_idx, const SparseCounts& words, std::vector<double>& out) {
    const std::size_t cells = m.cells();
    out.assign(cells, 0.0);
    bool fallback = !name_idx.has_value();
    if (name_idx) {
        fallback = true;
        for (std::size_t c = 0; c < cells; ++c) {
            if (m.phi[c][*name_idx] > 0.0) fallback = false;
        }
    }
    const double log_g = std::log(m.gender_prior());
    for (std::size_t c = 0; c < cells; ++c) {
        double lp = safe_log(m.pi[m.cell_bin(c)]) + log_g;
        if (!fallback) lp += safe_log(m.phi[c][*name_idx]);
        if (lp != kNegInf) {
            for (const auto& [w, cnt] : words) lp += cnt * log_theta[c][w];
        }
        out[c] = lp;
    }
    return fallback;
}

std::vector<std::vector<double>> logs_of(const std::vector<std::vector<double>>& rows) {
    std::vector<std::vector<double>> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out[i].resize(rows[i].size());
        for (std::size_t j = 0; j < rows[i].size(); ++j) out[i][j] = safe_log(rows[i][j]);
    }
    return out;
}

}  // namespace

DemographicModel em_fit(const std::vector<EmUser>& users, const NameDemographics& nd, const AgeBins& bins,
                        const EmConfig& config) {
    if (users.empty()) throw DataError("EM needs at least one user");
    if (!(config.theta_alpha > 0.0)) throw ValidationError("theta smoothing must be positive");
    if (config.max_iter < 1) throw ValidationError("EM max_iter must be at least 1");
    if (!(config.tol > 0.0)) throw ValidationError("EM tolerance must be positive");

    DemographicModel m;
    m.bins = bins;
    m.joint_gender = config.joint_gender;
    {
        std::set<std::string> vocab;
        for (const auto& u : users) {
            for (const auto& [w, c] : u.token_counts) {
                if (c > 0) vocab.insert(w);
            }
        }
        if (vocab.empty()) throw DataError("EM vocabulary is empty");
        m.vocabulary.assign(vocab.begin(), vocab.end());
    }
    {
        PhiTable t = build_phi(nd, bins, config.joint_gender, config.phi_alpha);
        m.names = std::move(t.names);
        m.phi = std::move(t.phi);
    }
    const std::size_t cells = m.cells();
    const std::size_t n_bins = bins.size();
    const std::size_t vocab = m.vocabulary.size();
    const double alpha = config.theta_alpha;

    std::vector<SparseCounts> words(users.size());
    std::vector<std::optional<std::size_t>> name_idx(users.size());
    for (std::size_t i = 0; i < users.size(); ++i) {
        words[i] = to_sparse(users[i].token_counts, m);
        name_idx[i] = m.name_index(users[i].name);
    }

    // Name-prior responsibilities seed theta.
    m.pi.assign(n_bins, 1.0 / static_cast<double>(n_bins));
    m.theta.assign(cells, std::vector<double>(vocab, alpha));
    {
        const std::vector<std::vector<double>> flat(cells, std::vector<double>(vocab, 0.0));
        std::vector<double> lp;
        for (std::size_t i = 0; i < users.size(); ++i) {
            log_joint(m, flat, name_idx[i], {}, lp);
            const double z = stats::log_sum_exp(lp);
            for (std::size_t c = 0; c < cells; ++c) {
                const double r = std::exp(lp[c] - z);
                if (r == 0.0) continue;
                for (const auto& [w, cnt] : words[i]) m.theta[c][w] += r * cnt;
            }
        }
        for (auto& row : m.theta) stats::normalize(row);
    }

    m.posteriors.assign(users.size(), std::vector<double>(cells, 0.0));
    m.name_fallback.assign(users.size(), false);
    std::vector<double> lp;
    for (int it = 0;; ++it) {
        // E-step at the current parameters.
        const auto log_theta = logs_of(m.theta);
        double loglik = 0.0;
        for (std::size_t i = 0; i < users.size(); ++i) {
            m.name_fallback[i] = log_joint(m, log_theta, name_idx[i], words[i], lp);
            const double z = stats::log_sum_exp(lp);
            loglik += z;
            for (std::size_t c = 0; c < cells; ++c) m.posteriors[i][c] = std::exp(lp[c] - z);
        }
        double prior = 0.0;
        for (const auto& row : log_theta) {
            for (const double v : row) prior += alpha * v;
        }
        const double objective = loglik + prior;
        if (!std::isfinite(objective)) {
            throw NumericalError("EM log-likelihood is not finite at iteration " + std::to_string(it));
        }
        m.log_likelihood_trace.push_back(loglik);
        m.objective_trace.push_back(objective);
        m.iterations = it;
        if (it > 0) {
            const double prev = m.objective_trace[m.objective_trace.size() - 2];
            const double rel = std::abs(objective - prev) / std::max(std::abs(prev), 1e-300);
            if (rel < config.tol) {
                m.converged = true;
                break;
            }
        }
        if (it == config.max_iter) break;

        // M-step.
        std::vector<double> pi(n_bins, 0.0);
        std::vector<std::vector<double>> theta(cells, std::vector<double>(vocab, alpha));
        for (std::size_t i = 0; i < users.size(); ++i) {
            for (std::size_t c = 0; c < cells; ++c) {
                const double r = m.posteriors[i][c];
                if (r == 0.0) continue;
                pi[m.cell_bin(c)] += r;
                for (const auto& [w, cnt] : words[i]) theta[c][w] += r * cnt;
            }
        }
        for (auto& v : pi) v /= static_cast<double>(users.size());
        for (auto& row : theta) stats::normalize(row);
        m.pi = std::move(pi);
        m.theta = std::move(theta);
    }
    return m;
}

std::size_t CellPosterior::argmax() const {
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

CellPosterior em_posterior(const DemographicModel& model, std::string_view name,
                           const corpus::TokenCounts& token_counts) {
    const auto log_theta = logs_of(model.theta);
    CellPosterior out;
    std::vector<double> lp;
    out.name_fallback = log_joint(model, log_theta, model.name_index(name), to_sparse(token_counts, model), lp);
    const double z = stats::log_sum_exp(lp);
    if (!std::isfinite(z)) throw NumericalError("posterior has no support for name '" + std::string(name) + "'");
    out.p.resize(lp.size());
    for (std::size_t c = 0; c < lp.size(); ++c) out.p[c] = std::exp(lp[c] - z);
    return out;
}

namespace {

/// Inverse-CDF sampler with a precomputed cumulative table.
class CumulativeTable {
public:
    explicit CumulativeTable(const std::vector<double>& weights) : cdf_(weights.size()) {
        double acc = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (!(weights[i] >= 0.0)) throw DomainError("negative or NaN sampling weight");
            acc += weights[i];
            cdf_[i] = acc;
        }
        if (!(acc > 0.0)) throw DomainError("sampling weights sum to zero");
    }

    std::size_t draw(stats::RngStream& rng) const {
        const double u = rng.uniform01() * cdf_.back();
        const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        auto idx = static_cast<std::size_t>(it - cdf_.begin());
        if (idx < cdf_.size()) return idx;
        // u rounded up to the total: last entry with positive weight.
        idx = cdf_.size() - 1;
        while (idx > 0 && cdf_[idx] == cdf_[idx - 1]) --idx;
        return idx;
    }

private:
    std::vector<double> cdf_;
};

}  // namespace

std::vector<SyntheticUser> generate_synthetic(const DemographicModel& truth, std::size_t n_users,
                                              std::size_t tokens_per_user, std::uint64_t seed) {
    const std::size_t cells = truth.cells();
    if (truth.pi.size() != truth.bins.size() || truth.phi.size() != cells || truth.theta.size() != cells) {
        throw ValidationError("synthetic model dimensions do not match its cells");
    }
    std::vector<SyntheticUser> out;
    if (n_users == 0) return out;
    const CumulativeTable pi(truth.pi);
    std::vector<CumulativeTable> phi;
    std::vector<CumulativeTable> theta;
    for (std::size_t c = 0; c < cells; ++c) {
        if (truth.phi[c].size() != truth.names.size() || truth.theta[c].size() != truth.vocabulary.size()) {
            throw ValidationError("synthetic model rows do not match its vocabularies");
        }
        phi.emplace_back(truth.phi[c]);
        theta.emplace_back(truth.theta[c]);
    }
    stats::RngStream rng(seed, 0);
    out.reserve(n_users);
    for (std::size_t i = 0; i < n_users; ++i) {
        SyntheticUser u;
        u.age_bin = pi.draw(rng);
        std::size_t g = 0;
        if (truth.joint_gender) {
            g = rng.uniform01() < 0.5 ? 0 : 1;
            u.sex = g == 0 ? Sex::female : Sex::male;
        }
        u.cell = u.age_bin * truth.genders() + g;
        u.name = truth.names[phi[u.cell].draw(rng)];
        for (std::size_t t = 0; t < tokens_per_user; ++t) {
            ++u.token_counts[truth.vocabulary[theta[u.cell].draw(rng)]];
        }
        out.push_back(std::move(u));
    }
    return out;
}

}  // namespace geolex::demographics

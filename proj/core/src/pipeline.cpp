#include "geolex/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <toml.hpp>

#include "geolex/csv.hpp"
#include "geolex/error.hpp"
#include "geolex/geo.hpp"
#include "geolex/report.hpp"
#include "geolex/text.hpp"

namespace geolex::pipeline {

namespace fs = std::filesystem;

namespace {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string resolve(const std::string& base, const std::string& p) {
    if (p.empty()) return p;
    const fs::path path(p);
    if (path.is_absolute() || base.empty()) return path.lexically_normal().string();
    return (fs::path(base) / path).lexically_normal().string();
}

// ---------------------------------------------------------------- TOML

/// Reads one TOML table and rejects keys that were never consumed.
class TableReader {
public:
    TableReader(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

    bool present() const { return table_ != nullptr; }

    template <typename T>
    void get(std::string_view key, T& out) {
        const toml::node* node = find(key);
        if (!node) return;
        if constexpr (std::is_same_v<T, bool>) {
            out = require<bool>(node, key, "a boolean");
        } else if constexpr (std::is_same_v<T, std::string>) {
            out = require<std::string>(node, key, "a string");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (const auto v = node->value<double>()) {
                out = *v;
            } else {
                fail(key, "a number");
            }
        } else {
            const auto v = node->value<std::int64_t>();
            if (!v || !node->is_integer()) fail(key, "an integer");
            if constexpr (std::is_unsigned_v<T>) {
                if (*v < 0) fail(key, "a non-negative integer");
            }
            out = static_cast<T>(*v);
        }
    }

    template <typename T>
    void get_list(std::string_view key, std::vector<T>& out) {
        const toml::node* node = find(key);
        if (!node) return;
        const toml::array* arr = node->as_array();
        if (!arr) fail(key, "an array");
        std::vector<T> values;
        for (const auto& item : *arr) {
            if constexpr (std::is_same_v<T, std::string>) {
                const auto v = item.value<std::string>();
                if (!v) fail(key, "an array of strings");
                values.push_back(*v);
            } else if constexpr (std::is_floating_point_v<T>) {
                const auto v = item.value<double>();
                if (!v) fail(key, "an array of numbers");
                values.push_back(*v);
            } else {
                const auto v = item.value<std::int64_t>();
                if (!v || !item.is_integer()) fail(key, "an array of integers");
                values.push_back(static_cast<T>(*v));
            }
        }
        out = std::move(values);
    }

    const toml::node* find(std::string_view key) {
        if (!table_) return nullptr;
        const toml::node* node = table_->get(key);
        if (node) used_.insert(std::string(key));
        return node;
    }

    void finish() const {
        if (!table_) return;
        for (const auto& [k, v] : *table_) {
            if (!used_.count(std::string(k.str()))) {
                throw ValidationError("unknown config key '" + qualified(k.str()) + "'");
            }
        }
    }

private:
    template <typename T>
    T require(const toml::node* node, std::string_view key, const char* what) {
        const auto v = node->value<T>();
        if (!v) fail(key, what);
        return *v;
    }

    [[noreturn]] void fail(std::string_view key, const char* what) const {
        throw ValidationError("config key '" + qualified(key) + "' must be " + what);
    }

    std::string qualified(std::string_view key) const {
        return name_.empty() ? std::string(key) : name_ + "." + std::string(key);
    }

    const toml::table* table_;
    std::string name_;
    std::set<std::string> used_;
};

const toml::table* subtable(TableReader& root, std::string_view key) {
    const toml::node* node = root.find(key);
    if (!node) return nullptr;
    const toml::table* t = node->as_table();
    if (!t) throw ValidationError("config key '" + std::string(key) + "' must be a table");
    return t;
}

// ------------------------------------------------------ canonical text

class Canon {
public:
    Canon& operator()(std::string_view key, const std::string& v) {
        os_ << key << '=' << v << '\n';
        return *this;
    }
    Canon& operator()(std::string_view key, const char* v) { return (*this)(key, std::string(v)); }
    Canon& operator()(std::string_view key, bool v) { return (*this)(key, std::string(v ? "true" : "false")); }
    Canon& operator()(std::string_view key, double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return (*this)(key, std::string(buf));
    }
    template <typename T>
        requires std::is_integral_v<T>
    Canon& operator()(std::string_view key, T v) {
        return (*this)(key, std::to_string(v));
    }
    template <typename T>
    Canon& list(std::string_view key, const std::vector<T>& v) {
        std::ostringstream s;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) s << ';';
            if constexpr (std::is_floating_point_v<T>) {
                char buf[40];
                std::snprintf(buf, sizeof buf, "%.17g", v[i]);
                s << buf;
            } else {
                s << v[i];
            }
        }
        return (*this)(key, s.str());
    }
    std::string str() const { return os_.str(); }

private:
    std::ostringstream os_;
};

std::string canon_filter(const PipelineConfig& c) {
    Canon k;
    k("filter.max_followers", c.filter.max_followers)("filter.max_followees", c.filter.max_followees)(
        "filter.max_statuses", c.filter.max_statuses)("filter.top_user_fraction", c.filter.top_user_fraction)(
        "filter.max_non_english_fraction", c.filter.max_non_english_fraction)("filter.english_tag",
                                                                              c.filter.english_tag);
    return k.str();
}

std::string canon_sampling(const PipelineConfig& c) {
    Canon k;
    std::vector<std::string> schemes;
    for (const auto s : c.sampling.schemes) schemes.emplace_back(sampling::to_string(s));
    k.list("sampling.schemes", schemes);
    k("sampling.messages_per_msa", c.sampling.messages_per_msa)("sampling.users_per_msa", c.sampling.users_per_msa)(
        "sampling.allow_short", c.sampling.allow_short)("seed", c.seed);
    return k.str();
}

std::string canon_bootstrap(const PipelineConfig& c) {
    Canon k;
    k("bootstrap.resamples", c.bootstrap.resamples)("bootstrap.level", c.bootstrap.level)("seed", c.seed);
    return k.str();
}

std::string canon_demographics(const PipelineConfig& c) {
    Canon k;
    const auto& d = c.demographics;
    std::vector<std::string> bins;
    for (const auto& b : d.age_bins) bins.push_back(std::to_string(b.lo) + "-" + std::to_string(b.hi));
    k("demographics.collection_year", d.collection_year).list("demographics.age_bins", bins);
    k("demographics.theta_alpha", d.em.theta_alpha)("demographics.phi_alpha", d.em.phi_alpha)(
        "demographics.max_iter", d.em.max_iter)("demographics.tol", d.em.tol)("demographics.joint_gender",
                                                                            d.em.joint_gender)(
        "demographics.rare_name_ratio", d.rare_name_ratio);
    return k.str() + canon_bootstrap(c);
}

std::string canon_lexvar(const PipelineConfig& c) {
    Canon k;
    const auto& l = c.lexvar;
    k("lexvar.enabled", l.enabled)("lexvar.lambda", l.sage.lambda)("lexvar.max_iter", l.sage.max_iter)(
        "lexvar.background_alpha", l.background_alpha)("lexvar.top_k", l.top_k);
    return k.str();
}

std::string canon_geoloc(const PipelineConfig& c) {
    Canon k;
    const auto& g = c.geoloc;
    k("geoloc.enabled", g.enabled)("geoloc.folds", g.folds).list("geoloc.lambda_grid", g.lambda_grid);
    k.list("geoloc.usage_edges", g.usage_edges);
    k("geoloc.soft_strata", g.soft_strata)("geoloc.max_iter", g.max_iter);
    return k.str() + canon_bootstrap(c);
}

std::string canon_report(const PipelineConfig& c) {
    Canon k;
    k.list("report.formats", c.report.formats);
    k("report.svg_timestamp", c.report.svg_timestamp);
    return k.str();
}

std::uint64_t hash_file(const std::string& path, std::uint64_t h) {
    return stats::fnv1a64(csv::read_file(path), h);
}

std::uint64_t hash_directory(const std::string& dir, std::uint64_t h) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        h = stats::fnv1a64(f.filename().string(), h);
        h = hash_file(f.string(), h);
    }
    return h;
}

std::string sample_name(sampling::Scheme s, sampling::Unit u) {
    return std::string(sampling::to_string(s)) + "_" + std::string(sampling::to_string(u));
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::optional<double> parse_opt(const std::string& s) {
    if (s.empty()) return std::nullopt;
    try {
        return std::stod(s);
    } catch (const std::exception&) {
        throw DataError("bad number '" + s + "' in an artifact");
    }
}

/// Parsed CSV artifact with header lookup.
struct Table {
    csv::Row header;
    std::vector<csv::Row> rows;
    std::string what;

    std::size_t col(std::string_view name) const { return csv::column(header, name, what); }
    const std::string& at(const csv::Row& r, std::string_view name) const {
        const std::size_t c = col(name);
        if (c >= r.size()) throw DataError(what + ": short row");
        return r[c];
    }
};

Table to_table(const std::string& text, const std::string& what) {
    auto rows = csv::parse(text);
    if (rows.empty()) throw DataError(what + " is empty");
    Table t;
    t.header = std::move(rows.front());
    t.rows.assign(std::make_move_iterator(rows.begin() + 1), std::make_move_iterator(rows.end()));
    t.what = what;
    return t;
}

const char* hint(Stage s) {
    switch (s) {
    case Stage::filter: return "check inputs.corpus and the [filter] settings";
    case Stage::geocode: return "check inputs.counties and inputs.gazetteer";
    case Stage::sample: return "lower sampling.messages_per_msa / users_per_msa or set sampling.allow_short = true";
    case Stage::demographics: return "check inputs.names, demographics.collection_year and the [demographics] settings";
    case Stage::lexvar: return "check inputs.lexicons or adjust lexvar.lambda / lexvar.max_iter";
    case Stage::geoloc: return "use larger user samples, fewer geoloc.folds or a different lambda grid";
    case Stage::report: return "re-run the upstream stages";
    }
    return "";
}

const std::vector<Stage>& upstream(Stage s) {
    static const std::map<Stage, std::vector<Stage>> deps{
        {Stage::filter, {}},
        {Stage::geocode, {Stage::filter}},
        {Stage::sample, {Stage::geocode}},
        {Stage::demographics, {Stage::sample}},
        {Stage::lexvar, {Stage::demographics}},
        {Stage::geoloc, {Stage::demographics}},
        {Stage::report, {Stage::filter, Stage::geocode, Stage::sample, Stage::demographics, Stage::lexvar,
                         Stage::geoloc}},
    };
    return deps.at(s);
}

}  // namespace

// ------------------------------------------------------------- config

PipelineConfig PipelineConfig::from_toml(std::string_view text, const std::string& base_dir) {
    toml::table root_table;
    try {
        root_table = toml::parse(text);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << "config is not valid TOML: " << e.description() << " (line " << e.source().begin.line << ")";
        throw ValidationError(os.str());
    }
    PipelineConfig c;
    TableReader root(&root_table, "");
    root.get("seed", c.seed);
    root.get("out_dir", c.out_dir);
    c.out_dir = resolve(base_dir, c.out_dir);

    TableReader in(subtable(root, "inputs"), "inputs");
    in.get("corpus", c.inputs.corpus);
    in.get("counties", c.inputs.counties);
    in.get("gazetteer", c.inputs.gazetteer);
    in.get("names", c.inputs.names);
    in.get_list("lexicons", c.inputs.lexicons);
    in.finish();
    c.inputs.corpus = resolve(base_dir, c.inputs.corpus);
    c.inputs.counties = resolve(base_dir, c.inputs.counties);
    c.inputs.gazetteer = resolve(base_dir, c.inputs.gazetteer);
    c.inputs.names = resolve(base_dir, c.inputs.names);
    for (auto& l : c.inputs.lexicons) l = resolve(base_dir, l);

    TableReader f(subtable(root, "filter"), "filter");
    f.get("max_followers", c.filter.max_followers);
    f.get("max_followees", c.filter.max_followees);
    f.get("max_statuses", c.filter.max_statuses);
    f.get("top_user_fraction", c.filter.top_user_fraction);
    f.get("max_non_english_fraction", c.filter.max_non_english_fraction);
    f.get("english_tag", c.filter.english_tag);
    f.finish();

    TableReader s(subtable(root, "sampling"), "sampling");
    std::vector<std::string> schemes;
    s.get_list("schemes", schemes);
    if (s.present() && s.find("schemes")) {
        c.sampling.schemes.clear();
        for (const auto& name : schemes) c.sampling.schemes.push_back(sampling::parse_scheme(name));
    }
    s.get("messages_per_msa", c.sampling.messages_per_msa);
    s.get("users_per_msa", c.sampling.users_per_msa);
    s.get("allow_short", c.sampling.allow_short);
    s.finish();

    TableReader d(subtable(root, "demographics"), "demographics");
    d.get("collection_year", c.demographics.collection_year);
    if (const toml::node* bins = d.find("age_bins")) {
        const toml::array* arr = bins->as_array();
        if (!arr) throw ValidationError("config key 'demographics.age_bins' must be an array of [lo, hi] pairs");
        c.demographics.age_bins.clear();
        for (const auto& item : *arr) {
            const toml::array* pair = item.as_array();
            if (!pair || pair->size() != 2 || !(*pair)[0].is_integer() || !(*pair)[1].is_integer()) {
                throw ValidationError("config key 'demographics.age_bins' must be an array of [lo, hi] pairs");
            }
            c.demographics.age_bins.push_back({static_cast<int>(*(*pair)[0].value<std::int64_t>()),
                                               static_cast<int>(*(*pair)[1].value<std::int64_t>())});
        }
    }
    d.get("theta_alpha", c.demographics.em.theta_alpha);
    d.get("phi_alpha", c.demographics.em.phi_alpha);
    d.get("max_iter", c.demographics.em.max_iter);
    d.get("tol", c.demographics.em.tol);
    d.get("joint_gender", c.demographics.em.joint_gender);
    d.get("rare_name_ratio", c.demographics.rare_name_ratio);
    d.finish();

    TableReader l(subtable(root, "lexvar"), "lexvar");
    l.get("enabled", c.lexvar.enabled);
    l.get("lambda", c.lexvar.sage.lambda);
    l.get("max_iter", c.lexvar.sage.max_iter);
    l.get("background_alpha", c.lexvar.background_alpha);
    l.get("top_k", c.lexvar.top_k);
    l.finish();

    TableReader g(subtable(root, "geoloc"), "geoloc");
    g.get("enabled", c.geoloc.enabled);
    g.get("folds", c.geoloc.folds);
    g.get_list("lambda_grid", c.geoloc.lambda_grid);
    g.get_list("usage_edges", c.geoloc.usage_edges);
    g.get("soft_strata", c.geoloc.soft_strata);
    g.get("max_iter", c.geoloc.max_iter);
    g.finish();

    TableReader b(subtable(root, "bootstrap"), "bootstrap");
    b.get("resamples", c.bootstrap.resamples);
    b.get("level", c.bootstrap.level);
    b.finish();

    TableReader r(subtable(root, "report"), "report");
    r.get_list("formats", c.report.formats);
    r.get("svg_timestamp", c.report.svg_timestamp);
    r.finish();

    root.finish();
    return c;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
    std::string text;
    try {
        text = csv::read_file(path);
    } catch (const IoError&) {
        throw ValidationError("config file not found: " + path);
    }
    return from_toml(text, fs::path(path).parent_path().string());
}

void PipelineConfig::validate() const {
    auto need_file = [](const std::string& p, const char* key) {
        if (p.empty()) throw ValidationError(std::string("config is missing ") + key);
        if (!fs::is_regular_file(p)) throw ValidationError(std::string(key) + " does not exist: " + p);
    };
    need_file(inputs.corpus, "inputs.corpus");
    need_file(inputs.counties, "inputs.counties");
    need_file(inputs.gazetteer, "inputs.gazetteer");
    if (inputs.names.empty()) throw ValidationError("config is missing inputs.names");
    if (!fs::is_directory(inputs.names)) throw ValidationError("inputs.names is not a directory: " + inputs.names);
    for (const auto& l : inputs.lexicons) need_file(l, "inputs.lexicons entry");
    if (out_dir.empty()) throw ValidationError("config is missing out_dir");

    if (filter.max_followers < 0 || filter.max_followees < 0 || filter.max_statuses < 0) {
        throw ValidationError("filter caps must be non-negative");
    }
    if (!(filter.top_user_fraction >= 0.0 && filter.top_user_fraction < 1.0)) {
        throw ValidationError("filter.top_user_fraction must be in [0, 1)");
    }
    if (!(filter.max_non_english_fraction >= 0.0 && filter.max_non_english_fraction <= 1.0)) {
        throw ValidationError("filter.max_non_english_fraction must be in [0, 1]");
    }
    if (sampling.schemes.empty()) throw ValidationError("sampling.schemes is empty");
    if (sampling.messages_per_msa == 0 || sampling.users_per_msa == 0) {
        throw ValidationError("sampling sizes must be positive");
    }
    if (demographics.collection_year < 1800 || demographics.collection_year > 3000) {
        throw ValidationError("demographics.collection_year is required (a calendar year)");
    }
    (void)demographics::AgeBins(demographics.age_bins);
    if (!(demographics.em.theta_alpha > 0.0) || !(demographics.em.phi_alpha >= 0.0)) {
        throw ValidationError("demographics smoothing must be theta_alpha > 0 and phi_alpha >= 0");
    }
    if (demographics.em.max_iter < 1 || !(demographics.em.tol > 0.0)) {
        throw ValidationError("demographics.max_iter must be >= 1 and tol > 0");
    }
    if (!(demographics.rare_name_ratio > 0.0)) throw ValidationError("demographics.rare_name_ratio must be positive");
    if (!(lexvar.sage.lambda >= 0.0)) throw ValidationError("lexvar.lambda must be non-negative");
    if (lexvar.sage.max_iter < 1) throw ValidationError("lexvar.max_iter must be positive");
    if (!(lexvar.background_alpha >= 0.0)) throw ValidationError("lexvar.background_alpha must be non-negative");
    if (lexvar.top_k == 0) throw ValidationError("lexvar.top_k must be positive");
    if (geoloc.folds < 3) throw ValidationError("geoloc.folds must be at least 3");
    if (geoloc.lambda_grid.empty()) throw ValidationError("geoloc.lambda_grid is empty");
    for (const double v : geoloc.lambda_grid) {
        if (!(v > 0.0)) throw ValidationError("geoloc.lambda_grid values must be positive");
    }
    (void)geoloc::UsageBins(geoloc.usage_edges);
    if (geoloc.max_iter < 1) throw ValidationError("geoloc.max_iter must be positive");
    bootstrap.validate();
    for (const auto& f : report.formats) {
        if (f != "csv" && f != "md" && f != "svg") {
            throw ValidationError("unknown report format '" + f + "' (expected csv, md or svg)");
        }
    }
}

std::string PipelineConfig::canonical() const {
    return canon_filter(*this) + canon_sampling(*this) + canon_demographics(*this) + canon_lexvar(*this) +
           canon_geoloc(*this) + canon_report(*this);
}

std::string PipelineConfig::hash() const { return hex64(stats::fnv1a64(canonical())); }

std::string_view to_string(Stage s) {
    switch (s) {
    case Stage::filter: return "filter";
    case Stage::geocode: return "geocode";
    case Stage::sample: return "sample";
    case Stage::demographics: return "demographics";
    case Stage::lexvar: return "lexvar";
    case Stage::geoloc: return "geoloc";
    case Stage::report: return "report";
    }
    return "filter";
}

Stage parse_stage(std::string_view s) {
    for (const auto st : all_stages()) {
        if (to_string(st) == s) return st;
    }
    throw ValidationError("unknown stage '" + std::string(s) + "'");
}

const std::vector<Stage>& all_stages() {
    static const std::vector<Stage> stages{Stage::filter,       Stage::geocode, Stage::sample, Stage::demographics,
                                           Stage::lexvar,       Stage::geoloc,  Stage::report};
    return stages;
}

std::string stamp_line(std::string_view stage, std::string_view key, std::uint64_t seed) {
    return "# geolex stage=" + std::string(stage) + " config_hash=" + std::string(key) +
           " seed=" + std::to_string(seed) + "\n";
}

// ------------------------------------------------------------ context

namespace detail {

struct StageContext {
    const PipelineConfig* cfg = nullptr;
    fs::path out;

    std::optional<corpus::ParsedCorpus> parsed;
    std::unordered_map<std::string, std::size_t> message_index;
    std::map<std::string, const corpus::UserProfile*> profiles;
    std::unordered_map<std::size_t, corpus::TokenCounts> tokens;
    std::optional<geo::GeoIndex> geo_index;
    std::optional<demographics::NameDemographics> names;

    // Per-stage run state.
    Stage stage = Stage::filter;
    std::string key;
    StageOutcome* outcome = nullptr;

    const corpus::ParsedCorpus& corpus() {
        if (!parsed) {
            parsed = corpus::parse_messages_file(cfg->inputs.corpus);
            for (std::size_t i = 0; i < parsed->messages.size(); ++i) {
                message_index.emplace(parsed->messages[i].message_id, i);
            }
            for (const auto& p : parsed->profiles) profiles[p.user_id] = &p;
        }
        return *parsed;
    }

    const corpus::Message& message(const std::string& id) {
        corpus();
        const auto it = message_index.find(id);
        if (it == message_index.end()) {
            throw DataError("artifact references message '" + id + "' that is not in the corpus");
        }
        return parsed->messages[it->second];
    }

    const corpus::TokenCounts& message_tokens(const std::string& id) {
        corpus();
        const auto it = message_index.find(id);
        if (it == message_index.end()) throw DataError("unknown message '" + id + "'");
        auto cached = tokens.find(it->second);
        if (cached == tokens.end()) {
            corpus::TokenCounts counts;
            for (auto& t : corpus::tokenize(parsed->messages[it->second].text)) ++counts[std::move(t)];
            cached = tokens.emplace(it->second, std::move(counts)).first;
        }
        return cached->second;
    }

    const corpus::UserProfile* profile(const std::string& user_id) {
        corpus();
        const auto it = profiles.find(user_id);
        return it == profiles.end() ? nullptr : it->second;
    }

    const geo::GeoIndex& geo() {
        if (!geo_index) geo_index = geo::load_geo_index(cfg->inputs.counties, cfg->inputs.gazetteer);
        return *geo_index;
    }

    const demographics::NameDemographics& name_tables() {
        if (!names) names = demographics::load_name_tables(cfg->inputs.names, cfg->demographics.collection_year);
        return *names;
    }

    fs::path path(const std::string& rel) const { return out / rel; }

    std::string read(const std::string& rel, Stage producer) const {
        const fs::path p = path(rel);
        if (!fs::is_regular_file(p)) {
            throw DataError("missing artifact " + p.string() + "; run `geolex " + std::string(to_string(producer)) +
                            "` first");
        }
        return csv::read_file(p.string());
    }

    bool exists(const std::string& rel) const { return fs::is_regular_file(path(rel)); }

    void write_raw(const std::string& rel, const std::string& content) {
        const fs::path p = path(rel);
        fs::create_directories(p.parent_path());
        csv::write_file(p.string(), content);
        outcome->outputs.push_back(rel);
    }

    /// Stamped artifact; `extra` lines are written as further comments.
    void write(const std::string& rel, const std::string& content, const std::vector<std::string>& extra = {}) {
        std::string body = stamp_line(to_string(stage), key, cfg->seed);
        for (const auto& e : extra) body += "# " + e + "\n";
        body += content;
        write_raw(rel, body);
    }

    void warn(std::string w) {
        if (outcome) outcome->warnings.push_back(std::move(w));
    }

    std::string stage_key_file(Stage s) const { return (out / ".stages" / (std::string(to_string(s)) + ".key")).string(); }

    std::string upstream_key(Stage s) const {
        const std::string f = stage_key_file(s);
        if (!fs::is_regular_file(f)) {
            throw DataError("stage '" + std::string(to_string(s)) + "' has not run in " + out.string() +
                            "; run `geolex " + std::string(to_string(s)) + "` first");
        }
        std::string k = csv::read_file(f);
        const auto nl = k.find('\n');
        return k.substr(0, nl);
    }
};

}  // namespace detail

// -------------------------------------------------------------- stages

namespace {

using Ctx = detail::StageContext;

std::vector<sampling::Sample> read_samples(Ctx& ctx, sampling::Unit unit) {
    std::vector<sampling::Sample> out;
    for (const auto scheme : ctx.cfg->sampling.schemes) {
        const std::string rel = "samples/" + sample_name(scheme, unit) + ".csv";
        out.push_back(sampling::parse_manifest_csv(ctx.read(rel, Stage::sample)));
    }
    return out;
}

std::string name_of(const sampling::Sample& s) { return sample_name(s.scheme, s.unit); }

void stage_filter(Ctx& ctx) {
    const auto& parsed = ctx.corpus();
    if (parsed.errors.count > 0) {
        ctx.warn(std::to_string(parsed.errors.count) + " malformed corpus records skipped");
    }
    const auto result = corpus::filter_corpus(parsed.messages, parsed.profiles, ctx.cfg->filter);
    std::string ids = "message_id,user_id\n";
    for (const auto& m : result.corpus.messages) ids += csv::join({m.message_id, m.user_id}) + "\n";
    ctx.write("filtered_messages.csv", ids);
    ctx.write("filter_report.csv", corpus::filter_report_csv(result.report));
}

void stage_geocode(Ctx& ctx) {
    const Table filtered = to_table(ctx.read("filtered_messages.csv", Stage::filter), "filtered_messages.csv");
    const auto& index = ctx.geo();
    std::string out = "message_id,user_id,gps_county,gps_msa,loc_msa\n";
    std::map<std::string, std::array<std::int64_t, 2>> msg_counts;
    std::map<std::string, std::array<std::set<std::string>, 2>> users;
    std::map<std::string, std::optional<std::string>> loc_cache;
    std::size_t invalid = 0;
    for (const auto& row : filtered.rows) {
        const std::string& mid = filtered.at(row, "message_id");
        const corpus::Message& m = ctx.message(mid);
        std::string county;
        std::string gps_msa;
        if (m.geo) {
            try {
                if (const auto c = geo::reverse_geocode(*m.geo, index)) {
                    county = *c;
                    gps_msa = index.find_county(county)->msa_id;
                }
            } catch (const DomainError&) {
                ++invalid;
            }
        }
        std::string loc_msa;
        if (const auto* p = ctx.profile(m.user_id); p && p->location_field) {
            auto it = loc_cache.find(m.user_id);
            if (it == loc_cache.end()) {
                it = loc_cache.emplace(m.user_id, geo::match_location_field(*p->location_field, index)).first;
            }
            if (it->second) loc_msa = *it->second;
        }
        if (gps_msa.empty() && loc_msa.empty()) continue;
        out += csv::join({mid, m.user_id, county, gps_msa, loc_msa}) + "\n";
        if (!gps_msa.empty()) {
            ++msg_counts[gps_msa][0];
            users[gps_msa][0].insert(m.user_id);
        }
        if (!loc_msa.empty()) {
            ++msg_counts[loc_msa][1];
            users[loc_msa][1].insert(m.user_id);
        }
    }
    if (invalid > 0) ctx.warn(std::to_string(invalid) + " messages had invalid coordinates");
    ctx.write("geocoded.csv", out);
    std::string summary = "msa,gps_messages,gps_users,loc_messages,loc_users\n";
    for (const auto& msa : index.msas()) {
        const auto mc = msg_counts[msa.msa_id];
        const auto& us = users[msa.msa_id];
        summary += csv::join({msa.msa_id, std::to_string(mc[0]), std::to_string(us[0].size()), std::to_string(mc[1]),
                              std::to_string(us[1].size())}) +
                   "\n";
    }
    ctx.write("geocode_summary.csv", summary);
}

void stage_sample(Ctx& ctx) {
    const Table geocoded = to_table(ctx.read("geocoded.csv", Stage::geocode), "geocoded.csv");
    std::vector<sampling::Candidate> gps;
    std::vector<sampling::Candidate> loc;
    for (const auto& row : geocoded.rows) {
        const auto& mid = geocoded.at(row, "message_id");
        const auto& uid = geocoded.at(row, "user_id");
        if (!geocoded.at(row, "gps_msa").empty()) {
            gps.push_back({mid, uid, geocoded.at(row, "gps_msa"), geocoded.at(row, "gps_county")});
        }
        if (!geocoded.at(row, "loc_msa").empty()) loc.push_back({mid, uid, geocoded.at(row, "loc_msa"), ""});
    }
    const auto& index = ctx.geo();
    std::string l1 = "sample,msa,num_counties,tweets,users,l1_population_users,l1_population_tweets\n";
    for (const auto scheme : ctx.cfg->sampling.schemes) {
        for (const auto unit : {sampling::Unit::message, sampling::Unit::user}) {
            const std::string name = sample_name(scheme, unit);
            sampling::SampleOptions opt;
            opt.unit = unit;
            opt.n_per_msa =
                unit == sampling::Unit::message ? ctx.cfg->sampling.messages_per_msa : ctx.cfg->sampling.users_per_msa;
            opt.seed = stats::stream_seed(ctx.cfg->seed, stats::fnv1a64("sample/" + name));
            opt.allow_short = ctx.cfg->sampling.allow_short;
            sampling::Sample s;
            try {
                s = scheme == sampling::Scheme::gps_county ? sampling::sample_county_balanced(gps, index, opt)
                    : scheme == sampling::Scheme::gps_msa ? sampling::sample_msa_balanced(gps, scheme, opt)
                                                           : sampling::sample_msa_balanced(loc, scheme, opt);
            } catch (const sampling::ShortfallError& e) {
                throw DataError("sample " + name + ": " + e.what());
            }
            for (const auto& w : s.warnings) ctx.warn(name + ": " + w);
            ctx.write("samples/" + name + ".csv", sampling::manifest_csv(s));
            if (scheme == sampling::Scheme::loc_msa) continue;
            std::vector<geo::GeocodedMessage> geocoded_members;
            geocoded_members.reserve(s.members.size());
            for (const auto& m : s.members) {
                geocoded_members.push_back({m.message_id, m.user_id, m.county_id, m.msa_id});
            }
            const auto table = geo::representation_table(geocoded_members, index);
            ctx.write("representation/" + name + ".csv", geo::representation_csv(table));
            const auto rows = csv::parse(geo::representation_summary_csv(table));
            for (std::size_t i = 1; i < rows.size(); ++i) {
                csv::Row r{name};
                r.insert(r.end(), rows[i].begin(), rows[i].end());
                l1 += csv::join(r) + "\n";
            }
        }
    }
    ctx.write("table1_l1.csv", l1);
}

struct UserInfo {
    std::string name;
    std::int64_t messages = 0;
};

/// Distinct users of a sample with their first names and sampled message counts.
std::map<std::string, UserInfo> sample_users(Ctx& ctx, const sampling::Sample& s) {
    std::map<std::string, UserInfo> users;
    for (const auto& m : s.members) {
        auto& u = users[m.user_id];
        ++u.messages;
        if (u.messages == 1) {
            const auto* p = ctx.profile(m.user_id);
            u.name = p ? text::first_name(p->display_name) : std::string();
        }
    }
    return users;
}

std::vector<demographics::NamedUser> named(const std::map<std::string, UserInfo>& users) {
    std::vector<demographics::NamedUser> out;
    out.reserve(users.size());
    for (const auto& [id, u] : users) out.push_back({id, u.name, u.messages});
    return out;
}

stats::BootstrapConfig boot(const Ctx& ctx, const std::string& label) {
    stats::BootstrapConfig b = ctx.cfg->bootstrap;
    b.seed = stats::stream_seed(ctx.cfg->seed, stats::fnv1a64("bootstrap/" + label));
    return b;
}

void stage_demographics(Ctx& ctx) {
    const auto& nd = ctx.name_tables();
    const demographics::AgeBins bins(ctx.cfg->demographics.age_bins);
    const double ratio = ctx.cfg->demographics.rare_name_ratio;

    std::vector<sampling::Sample> samples = read_samples(ctx, sampling::Unit::message);
    for (auto& s : read_samples(ctx, sampling::Unit::user)) samples.push_back(std::move(s));

    std::string table2 =
        "sample,users,users_kept,user_fraction_dropped,message_fraction_dropped,expected_age,age_ci_low,"
        "age_ci_high,pct_female,female_ci_low,female_ci_high\n";
    std::vector<std::pair<std::string, demographics::AgeDistribution>> dists;
    std::map<std::string, UserInfo> all_users;
    for (const auto& s : samples) {
        const std::string name = name_of(s);
        const auto users = sample_users(ctx, s);
        for (const auto& [id, u] : users) all_users.emplace(id, u);
        const auto rep = demographics::filter_rare_names(named(users), nd, ratio);
        std::vector<std::string> names;
        for (const auto& u : rep.kept) names.push_back(u.name);
        csv::Row row{name, std::to_string(users.size()), std::to_string(rep.kept.size()),
                     csv::format_double(rep.user_fraction_dropped), csv::format_double(rep.message_fraction_dropped)};
        if (names.empty()) {
            ctx.warn(name + ": no user name survives the rare-name filter");
            row.insert(row.end(), 6, std::string());
        } else {
            const auto age = demographics::expected_age(names, nd, boot(ctx, "age/" + name));
            const auto fem = demographics::female_share(names, nd, boot(ctx, "female/" + name));
            for (const double v : {age.point, age.lo, age.hi, 100.0 * fem.point, 100.0 * fem.lo, 100.0 * fem.hi}) {
                row.push_back(csv::format_double(v));
            }
            dists.emplace_back(name, demographics::sample_age_dist(names, nd).distribution);
        }
        table2 += csv::join(row) + "\n";
    }
    ctx.write("table2_demographics.csv", table2);

    std::string age_csv = "age";
    for (const auto& [n, d] : dists) age_csv += "," + csv::escape(n);
    age_csv += "\n";
    for (int a = 0; a <= demographics::kMaxAge; ++a) {
        age_csv += std::to_string(a);
        for (const auto& [n, d] : dists) age_csv += "," + csv::format_double(d.p[static_cast<std::size_t>(a)]);
        age_csv += "\n";
    }
    ctx.write("age_distribution.csv", age_csv);

    // Latent-class model over every sampled user that passes the name filter,
    // with the words of all their filtered messages.
    const auto rep = demographics::filter_rare_names(named(all_users), nd, ratio);
    if (rep.kept.empty()) throw DataError("no sampled user passes the rare-name filter");
    std::set<std::string> kept_ids;
    for (const auto& u : rep.kept) kept_ids.insert(u.user_id);
    std::map<std::string, corpus::TokenCounts> user_tokens;
    const Table filtered = to_table(ctx.read("filtered_messages.csv", Stage::filter), "filtered_messages.csv");
    for (const auto& row : filtered.rows) {
        const auto& uid = filtered.at(row, "user_id");
        if (!kept_ids.count(uid)) continue;
        auto& acc = user_tokens[uid];
        for (const auto& [w, c] : ctx.message_tokens(filtered.at(row, "message_id"))) acc[w] += c;
    }
    std::vector<demographics::EmUser> em_users;
    std::vector<std::string> em_ids;
    for (const auto& u : rep.kept) {
        em_ids.push_back(u.user_id);
        em_users.push_back({u.name, user_tokens[u.user_id]});
    }
    auto em = ctx.cfg->demographics.em;
    const auto model = demographics::em_fit(em_users, nd, bins, em);
    if (!model.converged) {
        ctx.warn("EM stopped after " + std::to_string(model.iterations) + " iterations without converging");
    }
    ctx.write("em_model.tsv", demographics::write_model_tsv(model));

    std::string trace = "iteration,objective,log_likelihood\n";
    for (std::size_t i = 0; i < model.objective_trace.size(); ++i) {
        trace += std::to_string(i) + "," + csv::format_double(model.objective_trace[i]) + "," +
                 csv::format_double(model.log_likelihood_trace[i]) + "\n";
    }
    ctx.write("em_trace.csv", trace);

    std::string post = "user_id,name,name_fallback";
    for (std::size_t c = 0; c < model.cells(); ++c) post += ",p_" + model.cell_label(c);
    post += ",map_cell,gender_hat,agebin_hat\n";
    for (std::size_t i = 0; i < em_ids.size(); ++i) {
        const auto& p = model.posteriors[i];
        csv::Row row{em_ids[i], em_users[i].name, model.name_fallback[i] ? "1" : "0"};
        for (const double v : p) row.push_back(csv::format_double(v));
        const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
        row.push_back(model.cell_label(best));
        const auto sex = model.cell_sex(best);
        row.push_back(sex ? (*sex == demographics::Sex::female ? "F" : "M") : "");
        row.push_back(bins.label(model.cell_bin(best)));
        post += csv::join(row) + "\n";
    }
    ctx.write("posteriors.csv", post);
}

/// Posterior rows keyed by user id.
struct Posteriors {
    std::vector<std::string> cells;  // cell labels in column order
    std::map<std::string, std::vector<double>> p;
    std::map<std::string, std::string> map_cell;
    std::map<std::string, std::string> gender_hat;
    std::map<std::string, std::string> agebin_hat;
};

Posteriors read_posteriors(Ctx& ctx) {
    const Table t = to_table(ctx.read("posteriors.csv", Stage::demographics), "posteriors.csv");
    Posteriors out;
    std::vector<std::size_t> cols;
    for (std::size_t i = 0; i < t.header.size(); ++i) {
        if (t.header[i].rfind("p_", 0) == 0) {
            out.cells.push_back(t.header[i].substr(2));
            cols.push_back(i);
        }
    }
    for (const auto& r : t.rows) {
        const auto& id = t.at(r, "user_id");
        std::vector<double> p;
        for (const auto c : cols) p.push_back(*parse_opt(r.at(c)));
        out.p[id] = std::move(p);
        out.map_cell[id] = t.at(r, "map_cell");
        out.gender_hat[id] = t.at(r, "gender_hat");
        out.agebin_hat[id] = t.at(r, "agebin_hat");
    }
    return out;
}

corpus::TokenCounts sample_tokens(Ctx& ctx, const sampling::Sample& s) {
    corpus::TokenCounts acc;
    for (const auto& m : s.members) {
        for (const auto& [w, c] : ctx.message_tokens(m.message_id)) acc[w] += c;
    }
    return acc;
}

void stage_lexvar(Ctx& ctx) {
    const auto& lcfg = ctx.cfg->lexvar;
    if (!lcfg.enabled) {
        ctx.write("lexvar_skipped.csv", "reason\nlexvar.enabled = false\n");
        return;
    }
    const Posteriors post = read_posteriors(ctx);
    const auto samples = read_samples(ctx, sampling::Unit::message);
    const sampling::Sample* target = &samples.front();
    for (const auto& s : samples) {
        if (s.scheme == sampling::Scheme::gps_msa) target = &s;
    }

    // Group token counts: MSA, and MSA x demographic cell (posterior argmax).
    const corpus::TokenCounts background_counts = sample_tokens(ctx, *target);
    const auto bg = lexvar::fit_background(background_counts, lcfg.background_alpha);
    std::map<std::string, corpus::TokenCounts> groups;
    for (const auto& m : target->members) {
        const auto& toks = ctx.message_tokens(m.message_id);
        auto& g = groups[m.msa_id];
        for (const auto& [w, c] : toks) g[w] += c;
        const auto cell = post.map_cell.find(m.user_id);
        if (cell == post.map_cell.end()) continue;
        auto& gc = groups[m.msa_id + "|" + cell->second];
        for (const auto& [w, c] : toks) gc[w] += c;
    }
    std::vector<std::pair<std::string, lexvar::TopTerms>> salient;
    std::string summary = "group,tokens,nonzero,positive,iterations,objective,kkt_residual\n";
    for (const auto& [group, counts] : groups) {
        const auto fit = lexvar::sage_fit(counts, bg, lcfg.sage);
        auto top = lexvar::top_k(fit, bg, lcfg.top_k);
        std::int64_t tokens = 0;
        for (const auto& [w, c] : counts) tokens += c;
        std::size_t positive = 0;
        for (const auto& [i, v] : fit.eta) positive += v > 0.0 ? 1 : 0;
        summary += csv::join({group, std::to_string(tokens), std::to_string(fit.nonzeros()), std::to_string(positive),
                              std::to_string(fit.iterations), csv::format_double(fit.objective),
                              csv::format_double(fit.kkt_residual)}) +
                   "\n";
        salient.emplace_back(group, std::move(top));
    }
    ctx.write("salience.csv", lexvar::salience_csv(salient), {"sample=" + name_of(*target)});
    ctx.write("sage_summary.csv", summary);

    if (ctx.cfg->inputs.lexicons.empty()) return;
    lexvar::AnnotatedLexicon lex;
    for (const auto& path : ctx.cfg->inputs.lexicons) {
        const auto part = lexvar::AnnotatedLexicon::load(path);
        for (const auto label : {lexvar::Label::nonstandard_word, lexvar::Label::entity_name, lexvar::Label::other}) {
            for (const auto& t : part.terms(label)) {
                if (const auto existing = lex.label(t); existing && *existing != label) {
                    throw DataError("lexicon term '" + t + "' has conflicting labels across files");
                }
                lex.set(t, label);
            }
        }
    }
    const std::vector<lexvar::Label> labels{lexvar::Label::nonstandard_word, lexvar::Label::entity_name};
    std::string rates = "sample,stratum,label,terms,lexicon_tokens,total_tokens,rate\n";
    std::map<std::pair<std::string, lexvar::Label>, lexvar::LexiconRate> by_sample;
    for (const auto& s : samples) {
        std::map<std::string, corpus::TokenCounts> strata;
        strata["all"] = sample_tokens(ctx, s);
        for (const auto& m : s.members) {
            const auto cell = post.map_cell.find(m.user_id);
            if (cell == post.map_cell.end()) continue;
            auto& acc = strata[cell->second];
            for (const auto& [w, c] : ctx.message_tokens(m.message_id)) acc[w] += c;
        }
        for (const auto label : labels) {
            const auto terms = lex.terms(label);
            for (const auto& [stratum, counts] : strata) {
                const auto r = lexvar::lexicon_rate(counts, terms);
                rates += csv::join({name_of(s), stratum, std::string(lexvar::to_string(label)),
                                    std::to_string(terms.size()), std::to_string(r.lexicon_tokens),
                                    std::to_string(r.total_tokens), csv::format_double(r.rate)}) +
                         "\n";
                if (stratum == "all") by_sample[{name_of(s), label}] = r;
            }
        }
    }
    ctx.write("lexicon_rates.csv", rates);

    std::string tests = "label,sample_a,sample_b,n_terms,mean_diff,t,df,p\n";
    for (const auto label : labels) {
        for (std::size_t a = 0; a < samples.size(); ++a) {
            for (std::size_t b = a + 1; b < samples.size(); ++b) {
                const auto& ra = by_sample.at({name_of(samples[a]), label});
                const auto& rb = by_sample.at({name_of(samples[b]), label});
                std::vector<double> va;
                std::vector<double> vb;
                for (const auto& [t, v] : ra.per_term) {
                    va.push_back(v);
                    vb.push_back(rb.per_term.at(t));
                }
                csv::Row row{std::string(lexvar::to_string(label)), name_of(samples[a]), name_of(samples[b]),
                             std::to_string(va.size())};
                try {
                    const auto t = lexvar::paired_t(va, vb);
                    for (const double v : {t.mean_diff, t.t, t.df, t.p}) row.push_back(csv::format_double(v));
                } catch (const DataError& e) {
                    ctx.warn("t-test " + row[0] + " " + row[1] + " vs " + row[2] + ": " + e.what());
                    row.insert(row.end(), 4, std::string());
                }
                tests += csv::join(row) + "\n";
            }
        }
    }
    ctx.write("lexicon_ttests.csv", tests);
}

void stage_geoloc(Ctx& ctx) {
    const auto& gcfg = ctx.cfg->geoloc;
    if (!gcfg.enabled) {
        ctx.write("geoloc_skipped.csv", "reason\ngeoloc.enabled = false\n");
        return;
    }
    const Posteriors post = read_posteriors(ctx);
    const geoloc::UsageBins usage(gcfg.usage_edges);
    std::string edges_note = "usage_edges=";
    for (std::size_t i = 0; i < gcfg.usage_edges.size(); ++i) {
        edges_note += (i ? ";" : "") + std::to_string(gcfg.usage_edges[i]);
    }
    const auto samples = read_samples(ctx, sampling::Unit::user);

    // Marginals of the posterior over gender and over age bins.
    std::vector<std::string> genders;
    std::vector<std::string> ages;
    std::vector<std::size_t> cell_gender(post.cells.size());
    std::vector<std::size_t> cell_age(post.cells.size());
    for (std::size_t c = 0; c < post.cells.size(); ++c) {
        const auto& label = post.cells[c];
        const auto slash = label.find('/');
        const std::string age = label.substr(0, slash);
        const std::string g = slash == std::string::npos ? std::string() : label.substr(slash + 1);
        auto ai = std::find(ages.begin(), ages.end(), age);
        if (ai == ages.end()) ai = ages.insert(ages.end(), age);
        cell_age[c] = static_cast<std::size_t>(ai - ages.begin());
        if (!g.empty()) {
            auto gi = std::find(genders.begin(), genders.end(), g);
            if (gi == genders.end()) gi = genders.insert(genders.end(), g);
            cell_gender[c] = static_cast<std::size_t>(gi - genders.begin());
        }
    }

    std::vector<std::string> sample_names;
    std::vector<bool> all_correct;
    std::vector<std::vector<double>> all_weights;
    std::vector<std::optional<std::size_t>> all_bins;
    std::string eval;
    std::string folds = "sample,fold,chosen_lambda";
    for (const double l : gcfg.lambda_grid) folds += ",dev_accuracy_" + csv::format_double(l);
    folds += "\n";
    for (const auto& s : samples) sample_names.push_back(name_of(s));

    for (std::size_t si = 0; si < samples.size(); ++si) {
        const auto& s = samples[si];
        const std::string name = sample_names[si];
        std::map<std::string, geoloc::LabeledUser> by_user;
        for (const auto& m : s.members) {
            auto& u = by_user[m.user_id];
            u.user_id = m.user_id;
            u.msa_id = m.msa_id;
            ++u.messages;
            for (const auto& [w, c] : ctx.message_tokens(m.message_id)) u.token_counts[w] += c;
        }
        std::vector<geoloc::LabeledUser> users;
        for (auto& [id, u] : by_user) users.push_back(std::move(u));

        geoloc::CvConfig cv;
        cv.folds = gcfg.folds;
        cv.lambda_grid = gcfg.lambda_grid;
        cv.seed = stats::stream_seed(ctx.cfg->seed, stats::fnv1a64("geoloc/" + name));
        cv.train.max_iter = gcfg.max_iter;
        const auto res = geoloc::cross_validate(users, cv);
        for (const auto& w : res.warnings) ctx.warn(name + ": " + w);
        for (std::size_t f = 0; f < res.chosen_lambda.size(); ++f) {
            csv::Row row{name, std::to_string(f), csv::format_double(res.chosen_lambda[f])};
            for (const double a : res.dev_accuracy[f]) row.push_back(csv::format_double(a));
            folds += csv::join(row) + "\n";
        }

        std::vector<std::int64_t> counts;
        for (const auto& u : users) counts.push_back(u.messages);
        std::vector<std::string> bin_warnings;
        const auto bins = geoloc::usage_bins(counts, usage, &bin_warnings);
        for (const auto& w : bin_warnings) ctx.warn(name + ": " + w);

        std::vector<geoloc::PredictionRow> rows;
        std::vector<bool> correct;
        std::vector<std::vector<double>> w_gender;
        std::vector<std::vector<double>> w_age;
        for (std::size_t i = 0; i < users.size(); ++i) {
            const auto& p = res.predictions[i];
            geoloc::PredictionRow row{p, bins[i] ? usage.label(*bins[i]) : std::string(), "", ""};
            std::vector<double> wg(genders.size(), 0.0);
            std::vector<double> wa(ages.size(), 0.0);
            if (const auto it = post.p.find(p.user_id); it != post.p.end()) {
                row.gender_hat = post.gender_hat.at(p.user_id);
                row.agebin_hat = post.agebin_hat.at(p.user_id);
                if (gcfg.soft_strata) {
                    for (std::size_t c = 0; c < it->second.size(); ++c) {
                        if (!genders.empty()) wg[cell_gender[c]] += it->second[c];
                        wa[cell_age[c]] += it->second[c];
                    }
                } else {
                    const auto gi = std::find(genders.begin(), genders.end(), row.gender_hat);
                    if (gi != genders.end()) wg[static_cast<std::size_t>(gi - genders.begin())] = 1.0;
                    const auto ai = std::find(ages.begin(), ages.end(), row.agebin_hat);
                    if (ai != ages.end()) wa[static_cast<std::size_t>(ai - ages.begin())] = 1.0;
                }
            }
            rows.push_back(std::move(row));
            correct.push_back(p.correct());
            w_gender.push_back(std::move(wg));
            w_age.push_back(std::move(wa));
            std::vector<double> ws(samples.size(), 0.0);
            ws[si] = 1.0;
            all_correct.push_back(p.correct());
            all_weights.push_back(std::move(ws));
            all_bins.push_back(bins[i]);
        }
        ctx.write("predictions/" + name + ".csv", geoloc::predictions_csv(rows), {edges_note});
        if (!genders.empty()) {
            eval += geoloc::stratified_accuracy("gender/" + name, correct, w_gender, genders, bins, usage,
                                                boot(ctx, "gender/" + name))
                        .to_csv(false);
        }
        eval += geoloc::stratified_accuracy("age/" + name, correct, w_age, ages, bins, usage, boot(ctx, "age/" + name))
                    .to_csv(false);
    }
    const auto sampling_panel = geoloc::stratified_accuracy("sampling", all_correct, all_weights, sample_names,
                                                            all_bins, usage, boot(ctx, "sampling"));
    ctx.write("geoloc_eval.csv", sampling_panel.to_csv(true) + eval,
              {edges_note, std::string("strata=") + (gcfg.soft_strata ? "soft" : "argmax")});
    ctx.write("geoloc_folds.csv", folds);
}

// -------------------------------------------------------------- report

std::vector<std::vector<std::string>> body(const Table& t) { return t.rows; }

void stage_report(Ctx& ctx) {
    const auto& formats = ctx.cfg->report.formats;
    const bool want_md = std::find(formats.begin(), formats.end(), "md") != formats.end();
    const bool want_svg = std::find(formats.begin(), formats.end(), "svg") != formats.end();
    const bool want_csv = std::find(formats.begin(), formats.end(), "csv") != formats.end();
    const std::optional<std::string> ts =
        ctx.cfg->report.svg_timestamp ? std::optional<std::string>(utc_timestamp()) : std::nullopt;
    std::string index = "# geolex report\n\n";
    index += "Seed " + std::to_string(ctx.cfg->seed) + ", config hash " + ctx.cfg->hash() + ".\n\n";

    auto emit_table = [&](const std::string& base, const std::string& title, const Table& t) {
        if (want_csv) ctx.write("report/" + base + ".csv", csv::join(t.header) + "\n" + [&] {
            std::string s;
            for (const auto& r : t.rows) s += csv::join(r) + "\n";
            return s;
        }());
        if (want_md) {
            const std::string md = "## " + title + "\n\n" + report::markdown_table(t.header, body(t));
            ctx.write_raw("report/" + base + ".md", md);
            index += md + "\n";
        }
    };

    const Table filter = to_table(ctx.read("filter_report.csv", Stage::filter), "filter_report.csv");
    emit_table("filter_report", "Filter cascade", filter);

    const Table t1 = to_table(ctx.read("table1_l1.csv", Stage::sample), "table1_l1.csv");
    emit_table("table1_l1", "Representativeness (L1 distance to census population shares)", t1);

    const Table t2 = to_table(ctx.read("table2_demographics.csv", Stage::demographics), "table2_demographics.csv");
    emit_table("table2_demographics", "Expected age and percent female by sample", t2);

    // Age distributions.
    const Table ages = to_table(ctx.read("age_distribution.csv", Stage::demographics), "age_distribution.csv");
    if (want_svg && ages.header.size() > 1) {
        report::LineChart chart;
        chart.title = "Name-induced age distribution by sample";
        chart.x_label = "age";
        chart.y_label = "probability";
        chart.timestamp = ts;
        for (const auto& r : ages.rows) chart.x.push_back(std::stod(r.at(0)));
        for (std::size_t c = 1; c < ages.header.size(); ++c) {
            report::LineSeries s{ages.header[c], {}};
            for (const auto& r : ages.rows) s.y.push_back(std::stod(r.at(c)));
            chart.series.push_back(std::move(s));
        }
        ctx.write_raw("report/fig_age_distribution.svg", report::svg_line_chart(chart));
        ctx.write("report/fig_age_distribution.csv", csv::read_file(ctx.path("age_distribution.csv").string()));
        index += "![age distribution](fig_age_distribution.svg)\n\n";
    }

    // Salient terms.
    if (ctx.exists("salience.csv")) {
        const Table sal = to_table(ctx.read("salience.csv", Stage::lexvar), "salience.csv");
        std::map<std::string, std::string> joined;
        std::vector<std::string> order;
        for (const auto& r : sal.rows) {
            const auto& g = sal.at(r, "group");
            if (!joined.count(g)) order.push_back(g);
            auto& s = joined[g];
            if (!s.empty()) s += ", ";
            s += sal.at(r, "term");
        }
        Table t3;
        t3.header = {"group", "most characteristic terms"};
        for (const auto& g : order) t3.rows.push_back({g, joined[g]});
        emit_table("table3_salience", "Most characteristic terms per group", t3);
    } else {
        index += "Salient-term table omitted: the lexvar stage was skipped.\n\n";
    }

    // Lexicon rates.
    if (ctx.exists("lexicon_rates.csv")) {
        const Table lr = to_table(ctx.read("lexicon_rates.csv", Stage::lexvar), "lexicon_rates.csv");
        std::vector<std::string> labels;
        std::vector<std::string> samples;
        std::map<std::pair<std::string, std::string>, double> rate;
        Table data;
        data.header = {"sample", "label", "rate"};
        for (const auto& r : lr.rows) {
            if (lr.at(r, "stratum") != "all") continue;
            const auto& s = lr.at(r, "sample");
            const auto& l = lr.at(r, "label");
            if (std::find(labels.begin(), labels.end(), l) == labels.end()) labels.push_back(l);
            if (std::find(samples.begin(), samples.end(), s) == samples.end()) samples.push_back(s);
            rate[{s, l}] = std::stod(lr.at(r, "rate"));
            data.rows.push_back({s, l, lr.at(r, "rate")});
        }
        if (want_svg) {
            report::BarChart chart;
            chart.title = "Annotated-lexicon token rate by sample";
            chart.y_label = "rate per token";
            chart.categories = labels;
            chart.timestamp = ts;
            for (const auto& s : samples) {
                report::BarSeries ser{s, {}, {}, {}};
                for (const auto& l : labels) {
                    const auto it = rate.find({s, l});
                    ser.values.push_back(it == rate.end() ? std::nullopt : std::optional<double>(it->second));
                }
                chart.series.push_back(std::move(ser));
            }
            ctx.write_raw("report/fig_lexicon_rates.svg", report::svg_bar_chart(chart));
            index += "![lexicon rates](fig_lexicon_rates.svg)\n\n";
        }
        emit_table("fig_lexicon_rates", "Annotated-lexicon rates", data);
        if (want_svg && !want_csv) {
            std::string s = csv::join(data.header) + "\n";
            for (const auto& r : data.rows) s += csv::join(r) + "\n";
            ctx.write("report/fig_lexicon_rates.csv", s);
        }
        if (ctx.exists("lexicon_ttests.csv")) {
            const Table tt = to_table(ctx.read("lexicon_ttests.csv", Stage::lexvar), "lexicon_ttests.csv");
            emit_table("lexicon_ttests", "Paired t-tests on per-term rates", tt);
        }
    }

    // Geolocation accuracy panels.
    if (ctx.exists("geoloc_eval.csv")) {
        const Table ev = to_table(ctx.read("geoloc_eval.csv", Stage::geoloc), "geoloc_eval.csv");
        std::vector<std::string> panels;
        for (const auto& r : ev.rows) {
            const auto& p = ev.at(r, "panel");
            if (std::find(panels.begin(), panels.end(), p) == panels.end()) panels.push_back(p);
        }
        for (const auto& panel : panels) {
            std::string base = "fig_accuracy_" + panel;
            std::replace(base.begin(), base.end(), '/', '_');
            Table data;
            data.header = ev.header;
            std::vector<std::string> bins;
            std::vector<std::string> strata;
            for (const auto& r : ev.rows) {
                if (ev.at(r, "panel") != panel) continue;
                data.rows.push_back(r);
                const auto& b = ev.at(r, "usage_bin");
                const auto& s = ev.at(r, "stratum");
                if (std::find(bins.begin(), bins.end(), b) == bins.end()) bins.push_back(b);
                if (std::find(strata.begin(), strata.end(), s) == strata.end()) strata.push_back(s);
            }
            std::string s = csv::join(data.header) + "\n";
            for (const auto& r : data.rows) s += csv::join(r) + "\n";
            if (want_csv || want_svg) ctx.write("report/" + base + ".csv", s);
            if (want_svg) {
                report::BarChart chart;
                chart.title = "Geolocation accuracy: " + panel;
                chart.y_label = "accuracy";
                chart.categories = bins;
                chart.y_max = 1.0;
                chart.timestamp = ts;
                for (const auto& st : strata) {
                    report::BarSeries ser{st, {}, {}, {}};
                    for (const auto& b : bins) {
                        std::optional<double> v, lo, hi;
                        for (const auto& r : data.rows) {
                            if (data.at(r, "stratum") == st && data.at(r, "usage_bin") == b) {
                                v = parse_opt(data.at(r, "accuracy"));
                                lo = parse_opt(data.at(r, "ci_low"));
                                hi = parse_opt(data.at(r, "ci_high"));
                            }
                        }
                        ser.values.push_back(v);
                        ser.lo.push_back(lo);
                        ser.hi.push_back(hi);
                    }
                    chart.series.push_back(std::move(ser));
                }
                ctx.write_raw("report/" + base + ".svg", report::svg_bar_chart(chart));
                index += "![" + panel + "](" + base + ".svg)\n\n";
            }
            if (want_md) {
                const std::string md =
                    "## Geolocation accuracy: " + panel + "\n\n" + report::markdown_table(data.header, body(data));
                index += md + "\n";
            }
        }
    } else {
        index += "Geolocation panels omitted: the geoloc stage was skipped.\n\n";
    }
    if (want_md) ctx.write_raw("report/report.md", index);
}

}  // namespace

// ------------------------------------------------------------ pipeline

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)), ctx_(std::make_shared<detail::StageContext>()) {
    config_.validate();
    ctx_->cfg = &config_;
    ctx_->out = config_.out_dir;
}

StageOutcome Pipeline::run_stage(Stage stage, const RunOptions& options) {
    detail::StageContext& ctx = *ctx_;
    StageOutcome outcome;
    outcome.stage = stage;
    const std::string name(to_string(stage));
    try {
        fs::create_directories(ctx.out / ".stages");
        std::uint64_t h = stats::fnv1a64(name);
        for (const auto up : upstream(stage)) h = stats::fnv1a64(ctx.upstream_key(up), h);
        switch (stage) {
        case Stage::filter:
            h = stats::fnv1a64(canon_filter(config_), h);
            h = hash_file(config_.inputs.corpus, h);
            break;
        case Stage::geocode:
            h = hash_file(config_.inputs.counties, h);
            h = hash_file(config_.inputs.gazetteer, h);
            break;
        case Stage::sample: h = stats::fnv1a64(canon_sampling(config_), h); break;
        case Stage::demographics:
            h = stats::fnv1a64(canon_demographics(config_), h);
            h = hash_directory(config_.inputs.names, h);
            break;
        case Stage::lexvar:
            h = stats::fnv1a64(canon_lexvar(config_), h);
            for (const auto& l : config_.inputs.lexicons) h = hash_file(l, h);
            break;
        case Stage::geoloc: h = stats::fnv1a64(canon_geoloc(config_), h); break;
        case Stage::report: h = stats::fnv1a64(canon_report(config_), h); break;
        }
        outcome.key = hex64(h);

        const std::string key_file = ctx.stage_key_file(stage);
        if (!options.force && fs::is_regular_file(key_file)) {
            const auto lines = csv::parse(csv::read_file(key_file));
            bool hit = !lines.empty() && !lines[0].empty() && lines[0][0] == outcome.key;
            std::vector<std::string> outputs;
            for (std::size_t i = 1; hit && i < lines.size(); ++i) {
                if (lines[i].empty()) continue;
                outputs.push_back(lines[i][0]);
                if (!fs::is_regular_file(ctx.out / lines[i][0])) hit = false;
            }
            if (hit) {
                outcome.cached = true;
                outcome.outputs = std::move(outputs);
                if (options.log) *options.log << "[" << name << "] cached (" << outcome.key << ")\n";
                return outcome;
            }
        }
        fs::remove(key_file);

        ctx.stage = stage;
        ctx.key = outcome.key;
        ctx.outcome = &outcome;
        switch (stage) {
        case Stage::filter: stage_filter(ctx); break;
        case Stage::geocode: stage_geocode(ctx); break;
        case Stage::sample: stage_sample(ctx); break;
        case Stage::demographics: stage_demographics(ctx); break;
        case Stage::lexvar: stage_lexvar(ctx); break;
        case Stage::geoloc: stage_geoloc(ctx); break;
        case Stage::report: stage_report(ctx); break;
        }
        ctx.outcome = nullptr;

        std::string record = outcome.key + "\n";
        for (const auto& o : outcome.outputs) record += csv::escape(o) + "\n";
        csv::write_file(key_file, record);
        if (options.log) {
            *options.log << "[" << name << "] wrote " << outcome.outputs.size() << " files (" << outcome.key << ")\n";
            for (const auto& w : outcome.warnings) *options.log << "[" << name << "] warning: " << w << "\n";
        }
        return outcome;
    } catch (const Error& e) {
        ctx.outcome = nullptr;
        throw Error(e.kind(), "stage '" + name + "': " + e.what() + " (hint: " + hint(stage) + ")");
    } catch (const fs::filesystem_error& e) {
        ctx.outcome = nullptr;
        throw IoError("stage '" + name + "': " + e.what());
    }
}

std::vector<StageOutcome> Pipeline::run_all(const RunOptions& options) {
    std::vector<StageOutcome> out;
    for (const auto s : all_stages()) out.push_back(run_stage(s, options));
    return out;
}

}  // namespace geolex::pipeline

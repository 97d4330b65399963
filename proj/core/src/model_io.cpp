#include <cstdio>
#include <sstream>

#include "geolex/demographics.hpp"
#include "geolex/error.hpp"

namespace geolex::demographics {

namespace {

constexpr std::string_view kMagic = "#geolex-demographic-model\t1";

std::string exact(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split_tabs(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto tab = line.find('\t', start);
        out.emplace_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
        if (tab == std::string_view::npos) break;
        start = tab + 1;
    }
    return out;
}

double parse_double(const std::string& s, std::size_t line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw DataError("model line " + std::to_string(line) + ": bad number '" + s + "'");
}

long long parse_int(const std::string& s, std::size_t line) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw DataError("model line " + std::to_string(line) + ": bad integer '" + s + "'");
}

}  // namespace

std::string write_model_tsv(const DemographicModel& m) {
    std::ostringstream os;
    os << kMagic << '\n';
    os << "[meta]\n";
    os << "joint_gender\t" << (m.joint_gender ? 1 : 0) << '\n';
    os << "iterations\t" << m.iterations << '\n';
    os << "converged\t" << (m.converged ? 1 : 0) << '\n';
    os << "[bins]\nlo\thi\n";
    for (const auto& b : m.bins.bins()) os << b.lo << '\t' << b.hi << '\n';
    os << "[pi]\nbin\tprob\n";
    for (std::size_t a = 0; a < m.pi.size(); ++a) os << a << '\t' << exact(m.pi[a]) << '\n';
    os << "[names]\nname\n";
    for (const auto& n : m.names) os << n << '\n';
    os << "[vocabulary]\nword\n";
    for (const auto& w : m.vocabulary) os << w << '\n';
    os << "[phi]\ncell\tname\tprob\n";
    for (std::size_t c = 0; c < m.phi.size(); ++c) {
        for (std::size_t j = 0; j < m.phi[c].size(); ++j) {
            if (m.phi[c][j] != 0.0) os << c << '\t' << j << '\t' << exact(m.phi[c][j]) << '\n';
        }
    }
    os << "[theta]\ncell\tword\tprob\n";
    for (std::size_t c = 0; c < m.theta.size(); ++c) {
        for (std::size_t j = 0; j < m.theta[c].size(); ++j) {
            if (m.theta[c][j] != 0.0) os << c << '\t' << j << '\t' << exact(m.theta[c][j]) << '\n';
        }
    }
    os << "[trace]\niteration\tobjective\tlog_likelihood\n";
    for (std::size_t i = 0; i < m.objective_trace.size(); ++i) {
        os << i << '\t' << exact(m.objective_trace[i]) << '\t'
           << exact(i < m.log_likelihood_trace.size() ? m.log_likelihood_trace[i] : 0.0) << '\n';
    }
    return os.str();
}

DemographicModel read_model_tsv(std::string_view tsv) {
    std::vector<std::string> lines;
    {
        std::size_t start = 0;
        while (start <= tsv.size()) {
            auto nl = tsv.find('\n', start);
            if (nl == std::string_view::npos) nl = tsv.size();
            std::string_view line = tsv.substr(start, nl - start);
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            lines.emplace_back(line);
            start = nl + 1;
        }
    }
    // "# " lines are stamps and comments.
    std::size_t first = 0;
    while (first < lines.size() && lines[first].rfind("# ", 0) == 0) ++first;
    if (first == lines.size() || lines[first] != kMagic) throw DataError("not a geolex demographic model file");

    DemographicModel m;
    std::vector<AgeBin> bins;
    std::vector<std::tuple<std::size_t, std::size_t, double>> phi_entries;
    std::vector<std::tuple<std::size_t, std::size_t, double>> theta_entries;
    std::string section;
    bool header_pending = false;
    for (std::size_t ln = first + 1; ln < lines.size(); ++ln) {
        const std::string& line = lines[ln];
        if (line.empty() || line.rfind("# ", 0) == 0) continue;
        if (line.front() == '[') {
            section = line;
            header_pending = section != "[meta]";
            continue;
        }
        if (header_pending) {
            header_pending = false;
            continue;
        }
        const auto f = split_tabs(line);
        const std::size_t where = ln + 1;
        auto need = [&](std::size_t n) {
            if (f.size() != n) throw DataError("model line " + std::to_string(where) + ": wrong field count");
        };
        if (section == "[meta]") {
            need(2);
            if (f[0] == "joint_gender") m.joint_gender = parse_int(f[1], where) != 0;
            else if (f[0] == "iterations") m.iterations = static_cast<int>(parse_int(f[1], where));
            else if (f[0] == "converged") m.converged = parse_int(f[1], where) != 0;
        } else if (section == "[bins]") {
            need(2);
            bins.push_back({static_cast<int>(parse_int(f[0], where)), static_cast<int>(parse_int(f[1], where))});
        } else if (section == "[pi]") {
            need(2);
            m.pi.push_back(parse_double(f[1], where));
        } else if (section == "[names]") {
            need(1);
            m.names.push_back(f[0]);
        } else if (section == "[vocabulary]") {
            need(1);
            m.vocabulary.push_back(f[0]);
        } else if (section == "[phi]" || section == "[theta]") {
            need(3);
            auto& dst = section == "[phi]" ? phi_entries : theta_entries;
            dst.emplace_back(static_cast<std::size_t>(parse_int(f[0], where)),
                             static_cast<std::size_t>(parse_int(f[1], where)), parse_double(f[2], where));
        } else if (section == "[trace]") {
            need(3);
            m.objective_trace.push_back(parse_double(f[1], where));
            m.log_likelihood_trace.push_back(parse_double(f[2], where));
        } else {
            throw DataError("model line " + std::to_string(where) + ": unknown section " + section);
        }
    }
    m.bins = AgeBins(std::move(bins));
    if (m.pi.size() != m.bins.size()) throw DataError("model pi does not match its age bins");
    const std::size_t cells = m.cells();
    m.phi.assign(cells, std::vector<double>(m.names.size(), 0.0));
    m.theta.assign(cells, std::vector<double>(m.vocabulary.size(), 0.0));
    for (const auto& [c, j, v] : phi_entries) {
        if (c >= cells || j >= m.names.size()) throw DataError("model phi entry out of range");
        m.phi[c][j] = v;
    }
    for (const auto& [c, j, v] : theta_entries) {
        if (c >= cells || j >= m.vocabulary.size()) throw DataError("model theta entry out of range");
        m.theta[c][j] = v;
    }
    return m;
}

}  // namespace geolex::demographics

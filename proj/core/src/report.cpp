#include "geolex/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "geolex/csv.hpp"
#include "geolex/error.hpp"

namespace geolex::report {

namespace {

constexpr const char* kPalette[] = {"#1b6ca8", "#d1495b", "#edae49", "#00798c", "#66a182",
                                    "#8d6a9f", "#2e4057", "#c97c5d"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string colour(std::size_t i) { return kPalette[i % (sizeof kPalette / sizeof kPalette[0])]; }

/// Round up to 1, 2 or 5 times a power of ten.
double nice_ceiling(double v) {
    if (!(v > 0.0)) return 1.0;
    const double p = std::pow(10.0, std::floor(std::log10(v)));
    for (const double m : {1.0, 2.0, 5.0, 10.0}) {
        if (m * p >= v * (1.0 - 1e-12)) return m * p;
    }
    return 10.0 * p;
}

void header(std::ostringstream& os, int width, int height, const std::string& title,
            const std::optional<std::string>& timestamp) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<title>" << xml_escape(title) << "</title>\n";
    if (timestamp) os << "<desc>generated " << xml_escape(*timestamp) << "</desc>\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << width / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(title)
       << "</text>\n";
}

}  // namespace

std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (const char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string markdown_table(const std::vector<std::string>& header_row,
                           const std::vector<std::vector<std::string>>& rows) {
    auto cell = [](const std::string& s) {
        std::string out;
        for (const char c : s) {
            if (c == '|') out += "\\|";
            else if (c == '\n') out += ' ';
            else out += c;
        }
        return out;
    };
    std::string out = "|";
    for (const auto& h : header_row) out += " " + cell(h) + " |";
    out += "\n|";
    for (std::size_t i = 0; i < header_row.size(); ++i) out += " --- |";
    out += '\n';
    for (const auto& r : rows) {
        out += "|";
        for (std::size_t i = 0; i < header_row.size(); ++i) out += " " + (i < r.size() ? cell(r[i]) : "") + " |";
        out += '\n';
    }
    return out;
}

std::string svg_bar_chart(const BarChart& chart) {
    const std::size_t n_cat = chart.categories.size();
    const std::size_t n_ser = chart.series.size();
    double ymax = 0.0;
    for (const auto& s : chart.series) {
        if (s.values.size() != n_cat || (!s.lo.empty() && s.lo.size() != n_cat) ||
            (!s.hi.empty() && s.hi.size() != n_cat)) {
            throw ValidationError("bar series '" + s.name + "' does not match the category count");
        }
        for (std::size_t i = 0; i < n_cat; ++i) {
            if (s.values[i]) ymax = std::max(ymax, *s.values[i]);
            if (!s.hi.empty() && s.hi[i]) ymax = std::max(ymax, *s.hi[i]);
        }
    }
    ymax = chart.y_max ? *chart.y_max : nice_ceiling(ymax);

    const int left = 60;
    const int right = 150;
    const int top = 30;
    const int bottom = 70;
    const int group_w = std::max(40, static_cast<int>(n_ser) * 18 + 16);
    const int plot_w = std::max(200, static_cast<int>(n_cat) * group_w);
    const int plot_h = 240;
    const int width = left + plot_w + right;
    const int height = top + plot_h + bottom;
    auto ypos = [&](double v) { return top + plot_h - plot_h * std::clamp(v / ymax, 0.0, 1.0); };

    std::ostringstream os;
    header(os, width, height, chart.title, chart.timestamp);
    // Axes and ticks.
    os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\""
       << top + plot_h << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 5; ++t) {
        const double v = ymax * t / 5.0;
        const double y = ypos(v);
        os << "<line x1=\"" << left - 4 << "\" y1=\"" << num(y) << "\" x2=\"" << left << "\" y2=\"" << num(y)
           << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << left - 6 << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">"
           << csv::format_double(v) << "</text>\n";
    }
    os << "<text x=\"14\" y=\"" << top + plot_h / 2 << "\" transform=\"rotate(-90 14 " << top + plot_h / 2
       << ")\" text-anchor=\"middle\">" << xml_escape(chart.y_label) << "</text>\n";

    const double bar_w = n_ser == 0 ? 0.0 : (group_w - 16.0) / static_cast<double>(n_ser);
    for (std::size_t c = 0; c < n_cat; ++c) {
        const double gx = left + static_cast<double>(c) * group_w + 8.0;
        os << "<text x=\"" << num(gx + (group_w - 16) / 2.0) << "\" y=\"" << top + plot_h + 14
           << "\" text-anchor=\"end\" transform=\"rotate(-30 " << num(gx + (group_w - 16) / 2.0) << ' '
           << top + plot_h + 14 << ")\">" << xml_escape(chart.categories[c]) << "</text>\n";
        for (std::size_t s = 0; s < n_ser; ++s) {
            const auto& ser = chart.series[s];
            if (!ser.values[c]) continue;
            const double v = *ser.values[c];
            const double x = gx + static_cast<double>(s) * bar_w;
            const double y = ypos(v);
            os << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(bar_w * 0.9)
               << "\" height=\"" << num(top + plot_h - y) << "\" fill=\"" << colour(s) << "\"><title>"
               << xml_escape(ser.name) << " / " << xml_escape(chart.categories[c]) << ": "
               << csv::format_double(v) << "</title></rect>\n";
            const bool has_lo = !ser.lo.empty() && ser.lo[c];
            const bool has_hi = !ser.hi.empty() && ser.hi[c];
            if (has_lo && has_hi) {
                const double cx = x + bar_w * 0.45;
                const double y_lo = ypos(*ser.lo[c]);
                const double y_hi = ypos(*ser.hi[c]);
                os << "<g stroke=\"black\"><title>CI " << csv::format_double(*ser.lo[c]) << " to "
                   << csv::format_double(*ser.hi[c]) << "</title>"
                   << "<line x1=\"" << num(cx) << "\" y1=\"" << num(y_lo) << "\" x2=\"" << num(cx) << "\" y2=\""
                   << num(y_hi) << "\"/>"
                   << "<line x1=\"" << num(cx - 3) << "\" y1=\"" << num(y_lo) << "\" x2=\"" << num(cx + 3)
                   << "\" y2=\"" << num(y_lo) << "\"/>"
                   << "<line x1=\"" << num(cx - 3) << "\" y1=\"" << num(y_hi) << "\" x2=\"" << num(cx + 3)
                   << "\" y2=\"" << num(y_hi) << "\"/></g>\n";
            }
        }
    }
    for (std::size_t s = 0; s < n_ser; ++s) {
        const int ly = top + 10 + static_cast<int>(s) * 16;
        os << "<rect x=\"" << left + plot_w + 12 << "\" y=\"" << ly - 9 << "\" width=\"10\" height=\"10\" fill=\""
           << colour(s) << "\"/>";
        os << "<text x=\"" << left + plot_w + 26 << "\" y=\"" << ly << "\">" << xml_escape(chart.series[s].name)
           << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string svg_line_chart(const LineChart& chart) {
    if (chart.x.size() < 2) throw ValidationError("line chart needs at least two x values");
    double ymax = 0.0;
    for (const auto& s : chart.series) {
        if (s.y.size() != chart.x.size()) {
            throw ValidationError("line series '" + s.name + "' does not match the x values");
        }
        for (const double v : s.y) ymax = std::max(ymax, v);
    }
    ymax = nice_ceiling(ymax);
    const double xmin = *std::min_element(chart.x.begin(), chart.x.end());
    const double xmax = *std::max_element(chart.x.begin(), chart.x.end());
    const int left = 60;
    const int right = 150;
    const int top = 30;
    const int bottom = 45;
    const int plot_w = 480;
    const int plot_h = 240;
    const int width = left + plot_w + right;
    const int height = top + plot_h + bottom;
    auto xpos = [&](double v) { return left + plot_w * (v - xmin) / (xmax - xmin); };
    auto ypos = [&](double v) { return top + plot_h - plot_h * std::clamp(v / ymax, 0.0, 1.0); };

    std::ostringstream os;
    header(os, width, height, chart.title, chart.timestamp);
    os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\""
       << top + plot_h << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 5; ++t) {
        const double v = ymax * t / 5.0;
        os << "<text x=\"" << left - 6 << "\" y=\"" << num(ypos(v) + 4) << "\" text-anchor=\"end\">"
           << csv::format_double(v) << "</text>\n";
        const double xv = xmin + (xmax - xmin) * t / 5.0;
        os << "<text x=\"" << num(xpos(xv)) << "\" y=\"" << top + plot_h + 16 << "\" text-anchor=\"middle\">"
           << csv::format_double(xv) << "</text>\n";
    }
    os << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 8 << "\" text-anchor=\"middle\">"
       << xml_escape(chart.x_label) << "</text>\n";
    os << "<text x=\"14\" y=\"" << top + plot_h / 2 << "\" transform=\"rotate(-90 14 " << top + plot_h / 2
       << ")\" text-anchor=\"middle\">" << xml_escape(chart.y_label) << "</text>\n";
    for (std::size_t s = 0; s < chart.series.size(); ++s) {
        os << "<polyline fill=\"none\" stroke=\"" << colour(s) << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < chart.x.size(); ++i) {
            if (i) os << ' ';
            os << num(xpos(chart.x[i])) << ',' << num(ypos(chart.series[s].y[i]));
        }
        os << "\"><title>" << xml_escape(chart.series[s].name) << "</title></polyline>\n";
        const int ly = top + 10 + static_cast<int>(s) * 16;
        os << "<rect x=\"" << left + plot_w + 12 << "\" y=\"" << ly - 9 << "\" width=\"10\" height=\"10\" fill=\""
           << colour(s) << "\"/>";
        os << "<text x=\"" << left + plot_w + 26 << "\" y=\"" << ly << "\">" << xml_escape(chart.series[s].name)
           << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace geolex::report

#pragma once

// Markdown tables and SVG charts for the report stage. Values are printed
// with csv::format_double so every number in a chart matches its CSV.

#include <optional>
#include <string>
#include <vector>

namespace geolex::report {

/// GitHub-flavoured table; cells are escaped for '|'.
std::string markdown_table(const std::vector<std::string>& header,
                           const std::vector<std::vector<std::string>>& rows);

struct BarSeries {
    std::string name;
    std::vector<std::optional<double>> values;  // one per category; none = gap
    std::vector<std::optional<double>> lo;      // whisker bounds
    std::vector<std::optional<double>> hi;
};

struct BarChart {
    std::string title;
    std::string y_label;
    std::vector<std::string> categories;
    std::vector<BarSeries> series;
    std::optional<double> y_max;   // default: largest value or bound
    std::optional<std::string> timestamp;  // rendered in a <desc> element when set
};

/// Grouped bars, one group per category and one colour per series, with
/// vertical error whiskers where bounds are given. Throws ValidationError
/// when a series length differs from the category count.
std::string svg_bar_chart(const BarChart& chart);

struct LineSeries {
    std::string name;
    std::vector<double> y;
};

struct LineChart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<double> x;
    std::vector<LineSeries> series;
    std::optional<std::string> timestamp;
};

std::string svg_line_chart(const LineChart& chart);

/// Escapes &, <, >, " for XML text and attributes.
std::string xml_escape(const std::string& s);

}  // namespace geolex::report

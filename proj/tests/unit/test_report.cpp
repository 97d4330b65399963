#include <doctest.h>

#include "geolex/csv.hpp"
#include "geolex/error.hpp"
#include "geolex/report.hpp"

using namespace geolex;
using namespace geolex::report;

TEST_CASE("markdown table escapes pipes") {
    const auto md = markdown_table({"a", "b|c"}, {{"1", "x|y"}, {"2"}});
    CHECK(md == "| a | b\\|c |\n| --- | --- |\n| 1 | x\\|y |\n| 2 |  |\n");
}

TEST_CASE("xml escaping") {
    CHECK(xml_escape("a<b & \"c\">") == "a&lt;b &amp; &quot;c&quot;&gt;");
}

TEST_CASE("bar chart prints every value as in CSV") {
    BarChart c;
    c.title = "Accuracy <by> bin";
    c.y_label = "accuracy";
    c.categories = {"1-9", "10-19", "20+"};
    c.series = {BarSeries{"F", {0.8123456789, std::nullopt, 0.5}, {0.7, std::nullopt, 0.4}, {0.9, std::nullopt, 0.6}},
                BarSeries{"M", {0.25, 1.0 / 3.0, 0.75}, {}, {}}};
    const auto svg = svg_bar_chart(c);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("Accuracy &lt;by&gt; bin") != std::string::npos);
    for (const auto& s : c.series) {
        for (const auto& v : s.values) {
            if (v) CHECK(svg.find(csv::format_double(*v)) != std::string::npos);
        }
    }
    CHECK(svg.find("<desc>") == std::string::npos);
    c.timestamp = "2026-01-01T00:00:00Z";
    CHECK(svg_bar_chart(c).find("<desc>generated 2026-01-01T00:00:00Z</desc>") != std::string::npos);
    c.series[0].values.pop_back();
    CHECK_THROWS_AS(svg_bar_chart(c), ValidationError);
}

TEST_CASE("line chart is deterministic") {
    LineChart c;
    c.title = "age";
    c.x_label = "age";
    c.y_label = "p";
    c.x = {0, 1, 2};
    c.series = {{"sample", {0.2, 0.5, 0.3}}};
    const auto a = svg_line_chart(c);
    CHECK(a == svg_line_chart(c));
    CHECK(a.find("<polyline") != std::string::npos);
}

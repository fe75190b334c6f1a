#pragma once

#include <json.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace rf::analysis {

struct PlotSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    std::string units;

    // Throws InvalidArgument on unequal lengths or non-finite values.
    void validate() const;
    nlohmann::json to_json() const;  // {name, x, y, units}
    static PlotSeries from_json(const nlohmann::json& j);
};

// RFC-4180 field quoting: wraps in double quotes when the field holds a comma,
// quote, CR or LF, doubling embedded quotes.
std::string csv_field(std::string_view s);

struct BenchSummary {
    std::string csv;                  // header row plus one row per report row, CRLF line ends
    std::vector<PlotSeries> series;   // PSNR vs evaluations, one per sampler family
    std::vector<std::string> non_monotone;  // families whose PSNR drops as samples grow

    nlohmann::json plot_json() const;  // {"series": [...], "non_monotone": [...]}
};

// Accepts a bench report (see rf::bench::BenchReport); throws FormatError on schema violations.
BenchSummary summarize_bench(const nlohmann::json& report);

// Trailing moving average over at most `window` points; window 1 is the identity.
std::vector<double> smooth(const std::vector<double>& v, std::size_t window);

// Loss-term and validation-PSNR curves from JSON-lines training metrics. Throws
// FormatError naming the 1-based line on malformed or non-finite entries.
std::vector<PlotSeries> summarize_training(std::string_view jsonl, std::size_t window = 1);

nlohmann::json series_json(const std::vector<PlotSeries>& series);

} // namespace rf::analysis

#include "rf/analysis/summary.hpp"

#include "rf/bench/bench.hpp"
#include "rf/core/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace rf::analysis {

void PlotSeries::validate() const
{
    if (x.size() != y.size()) throw InvalidArgument("series '" + name + "': x and y differ in length");
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
            throw InvalidArgument("series '" + name + "': non-finite point " + std::to_string(i));
}

nlohmann::json PlotSeries::to_json() const
{
    validate();
    return {{"name", name}, {"x", x}, {"y", y}, {"units", units}};
}

PlotSeries PlotSeries::from_json(const nlohmann::json& j)
{
    PlotSeries s;
    try {
        s.name = j.at("name").get<std::string>();
        s.x = j.at("x").get<std::vector<double>>();
        s.y = j.at("y").get<std::vector<double>>();
        s.units = j.at("units").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("plot series: ") + e.what());
    }
    s.validate();
    return s;
}

std::string csv_field(std::string_view s)
{
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

nlohmann::json BenchSummary::plot_json() const
{
    return {{"series", series_json(series)}, {"non_monotone", non_monotone}};
}

BenchSummary summarize_bench(const nlohmann::json& report)
{
    const bench::BenchReport rep = bench::BenchReport::from_json(report);
    BenchSummary out;

    std::ostringstream csv;
    csv << "sampler,kind,samples,fine,evaluations,secs,psnr,reference\r\n";
    for (const auto& r : rep.rows)
        csv << csv_field(r.sampler) << ',' << r.kind << ',' << r.samples << ',' << r.fine << ',' << r.evaluations << ','
            << fmt::format("{}", r.secs) << ',' << fmt::format("{}", r.psnr) << ',' << (r.reference ? "true" : "false")
            << "\r\n";
    out.csv = csv.str();

    // Rows are already in evaluation order; std::map fixes the family order.
    std::map<std::string, PlotSeries> families;
    for (const auto& r : rep.rows) {
        if (r.reference) continue;
        PlotSeries& s = families[r.kind];
        s.name = r.kind;
        s.units = "x: field evaluations per image; y: PSNR (dB) vs reference";
        s.x.push_back(static_cast<double>(r.evaluations));
        s.y.push_back(r.psnr);
    }
    for (auto& [kind, s] : families) {
        for (std::size_t i = 1; i < s.y.size(); ++i)
            if (s.x[i] > s.x[i - 1] && s.y[i] < s.y[i - 1]) {
                out.non_monotone.push_back(kind);
                break;
            }
        out.series.push_back(std::move(s));
    }
    return out;
}

std::vector<double> smooth(const std::vector<double>& v, std::size_t window)
{
    if (window == 0) throw InvalidArgument("smoothing window must be >= 1");
    std::vector<double> out(v.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        acc += v[i];
        if (i >= window) acc -= v[i - window];
        out[i] = window == 1 ? v[i] : acc / static_cast<double>(std::min(i + 1, window));
    }
    return out;
}

std::vector<PlotSeries> summarize_training(std::string_view jsonl, std::size_t window)
{
    if (window == 0) throw InvalidArgument("smoothing window must be >= 1");
    static constexpr const char* kTerms[] = {"l_pht", "l_depth", "l_op"};
    std::vector<PlotSeries> loss(3);
    for (std::size_t k = 0; k < 3; ++k) {
        loss[k].name = kTerms[k];
        loss[k].units = "x: iteration; y: loss";
    }
    PlotSeries psnr{"psnr_val", {}, {}, "x: iteration; y: PSNR (dB)"};

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < jsonl.size()) {
        std::size_t end = jsonl.find('\n', pos);
        if (end == std::string_view::npos) end = jsonl.size();
        std::string_view line = jsonl.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

        const auto where = [&](const std::string& what) { return FormatError(fmt::format("metrics line {}: {}", line_no, what)); };
        const nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            const bool nan = line.find("NaN") != std::string_view::npos || line.find("Infinity") != std::string_view::npos;
            throw where(nan ? "non-finite value" : "not valid JSON");
        }
        if (!j.is_object() || !j.contains("iter") || !j["iter"].is_number()) throw where("missing iter");
        const double it = j["iter"].get<double>();
        for (std::size_t k = 0; k < 3; ++k) {
            const auto f = j.find(kTerms[k]);
            if (f == j.end()) throw where(std::string("missing ") + kTerms[k]);
            if (!f->is_number() || !std::isfinite(f->get<double>())) throw where(std::string("non-finite ") + kTerms[k]);
            loss[k].x.push_back(it);
            loss[k].y.push_back(f->get<double>());
        }
        if (const auto f = j.find("psnr_val"); f != j.end() && !f->is_null()) {
            if (!f->is_number() || !std::isfinite(f->get<double>())) throw where("non-finite psnr_val");
            psnr.x.push_back(it);
            psnr.y.push_back(f->get<double>());
        }
    }
    for (auto& s : loss) s.y = smooth(s.y, window);
    loss.push_back(std::move(psnr));
    return loss;
}

nlohmann::json series_json(const std::vector<PlotSeries>& series)
{
    nlohmann::json a = nlohmann::json::array();
    for (const auto& s : series) a.push_back(s.to_json());
    return a;
}

} // namespace rf::analysis

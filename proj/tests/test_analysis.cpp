#include "rf/analysis/summary.hpp"
#include "rf/bench/bench.hpp"
#include "rf/core/error.hpp"
#include "rf/synthscene/dataset.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rf;
using namespace rf::analysis;
using nlohmann::json;

namespace {

json row(const std::string& sampler, const std::string& kind, std::uint64_t evals, double psnr, bool ref = false)
{
    return {{"sampler", sampler}, {"kind", kind}, {"samples", 1}, {"fine", 0},
            {"evaluations", evals}, {"secs", 0.5}, {"psnr", psnr}, {"reference", ref}};
}

json report(json rows)
{
    return {{"version", 1}, {"scene", 0}, {"width", 4}, {"height", 4}, {"rows", std::move(rows)}};
}

std::vector<std::string> split_crlf(const std::string& s)
{
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        const std::size_t e = s.find("\r\n", pos);
        EXPECT_NE(e, std::string::npos) << "line without CRLF";
        out.push_back(s.substr(pos, e - pos));
        pos = e + 2;
    }
    return out;
}

std::string metrics(std::size_t n)
{
    std::string s;
    for (std::size_t i = 0; i < n; ++i)
        s += json{{"iter", i}, {"l_pht", 1.0 / (i + 1)}, {"l_depth", 0.1 * i}, {"l_op", 0.5},
                  {"psnr_val", i % 5 == 4 ? json(20.0 + i) : json(nullptr)}, {"secs", 0.0}}
                 .dump() +
             "\n";
    return s;
}

} // namespace

TEST(Csv, Rfc4180Quoting)
{
    EXPECT_EQ(csv_field("plain"), "plain");
    EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
    EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    EXPECT_EQ(csv_field("two\nlines"), "\"two\nlines\"");
    EXPECT_EQ(csv_field(""), "");
}

TEST(SummarizeBench, EmptyReportGivesHeaderOnly)
{
    const BenchSummary s = summarize_bench(report(json::array()));
    const auto lines = split_crlf(s.csv);
    ASSERT_EQ(lines.size(), 1u);
    EXPECT_EQ(lines[0], "sampler,kind,samples,fine,evaluations,secs,psnr,reference");
    EXPECT_TRUE(s.series.empty());
    EXPECT_TRUE(s.non_monotone.empty());
}

TEST(SummarizeBench, OneSeriesPerSampler)
{
    const json r = report({row("depth:16", "depth", 16, 30.0), row("uniform:16", "uniform", 16, 20.0),
                           row("uniform:64", "uniform", 64, 25.0), row("uniform:1024", "uniform", 1024, 99.0, true)});
    const BenchSummary s = summarize_bench(r);
    ASSERT_EQ(s.series.size(), 2u);
    EXPECT_EQ(s.series[0].name, "depth");
    EXPECT_EQ(s.series[1].name, "uniform");
    EXPECT_EQ(s.series[1].x, (std::vector<double>{16, 64}));
    EXPECT_EQ(s.series[1].y, (std::vector<double>{20.0, 25.0}));
    EXPECT_TRUE(s.non_monotone.empty());

    const auto lines = split_crlf(s.csv);
    ASSERT_EQ(lines.size(), 5u);
    EXPECT_EQ(lines[1], "depth:16,depth,1,0,16,0.5,30,false");
    EXPECT_EQ(lines[4], "uniform:1024,uniform,1,0,1024,0.5,99,true");

    const json pj = s.plot_json();
    EXPECT_EQ(pj["series"][1], (json{{"name", "uniform"}, {"x", {16.0, 64.0}}, {"y", {20.0, 25.0}},
                                     {"units", s.series[1].units}}));
}

TEST(SummarizeBench, MonotonicityFlag)
{
    const json r = report({row("uniform:64", "uniform", 64, 25.0), row("uniform:16", "uniform", 16, 26.0)});
    EXPECT_THROW(summarize_bench(r), FormatError);  // not sorted by evaluations
    const json sorted = report({row("depth:16", "depth", 16, 30.0), row("uniform:16", "uniform", 16, 26.0),
                                row("depth:32", "depth", 32, 31.0), row("uniform:64", "uniform", 64, 25.0)});
    EXPECT_EQ(summarize_bench(sorted).non_monotone, std::vector<std::string>{"uniform"});
}

TEST(SummarizeBench, QuotesSamplerNames)
{
    const BenchSummary s = summarize_bench(report({row("odd,name", "uniform", 4, 10.0)}));
    EXPECT_EQ(split_crlf(s.csv)[1].substr(0, 11), "\"odd,name\",");
}

TEST(SummarizeBench, SchemaViolations)
{
    EXPECT_THROW(summarize_bench(json::array()), FormatError);
    EXPECT_THROW(summarize_bench(json{{"version", 1}}), FormatError);
    json bad = report({row("uniform:4", "uniform", 4, 10.0)});
    bad["version"] = 2;
    EXPECT_THROW(summarize_bench(bad), FormatError);
    bad = report({row("warp:4", "warp", 4, 10.0)});
    EXPECT_THROW(summarize_bench(bad), FormatError);
    bad = report({row("uniform:4", "uniform", 4, 10.0)});
    bad["rows"][0]["psnr"] = "high";
    EXPECT_THROW(summarize_bench(bad), FormatError);
    bad = report({row("uniform:4", "uniform", 4, 10.0)});
    bad["rows"][0].erase("evaluations");
    EXPECT_THROW(summarize_bench(bad), FormatError);
    bad = report({row("uniform:4", "uniform", 4, 10.0)});
    bad["rows"][0]["evaluations"] = -3;
    EXPECT_THROW(summarize_bench(bad), FormatError);
}

TEST(SummarizeBench, PureFunctionOfInput)
{
    const json r = report({row("depth:16", "depth", 16, 30.0), row("uniform:64", "uniform", 64, 25.0)});
    const BenchSummary a = summarize_bench(r), b = summarize_bench(r);
    EXPECT_EQ(a.csv, b.csv);
    EXPECT_EQ(a.plot_json(), b.plot_json());
}

TEST(Smooth, WindowOneIsIdentity)
{
    Rng rng(3);
    std::vector<double> v(50);
    for (double& x : v) x = rng.normal();
    EXPECT_EQ(smooth(v, 1), v);
    EXPECT_THROW(smooth(v, 0), InvalidArgument);
}

TEST(Smooth, TrailingMean)
{
    const std::vector<double> v{1, 2, 3, 4, 5};
    const auto s = smooth(v, 2);
    const std::vector<double> expect{1.0, 1.5, 2.5, 3.5, 4.5};
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(s[i], expect[i], 1e-15);
    const auto all = smooth(v, 10);
    EXPECT_NEAR(all.back(), 3.0, 1e-15);
}

TEST(SummarizeTraining, TenLinesGiveTenPoints)
{
    const auto series = summarize_training(metrics(10));
    ASSERT_EQ(series.size(), 4u);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_EQ(series[k].x.size(), 10u);
        EXPECT_EQ(series[k].y.size(), 10u);
    }
    EXPECT_EQ(series[0].name, "l_pht");
    EXPECT_EQ(series[0].y[3], 0.25);
    EXPECT_EQ(series[3].name, "psnr_val");
    EXPECT_EQ(series[3].x, (std::vector<double>{4, 9}));
    EXPECT_EQ(series[3].y, (std::vector<double>{24.0, 29.0}));
}

TEST(SummarizeTraining, WindowOneMatchesRawValues)
{
    const auto raw = summarize_training(metrics(12), 1);
    for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(raw[0].y[i], 1.0 / (i + 1));
    const auto sm = summarize_training(metrics(12), 3);
    EXPECT_EQ(sm[0].y, smooth(raw[0].y, 3));
    EXPECT_EQ(sm[3].y, raw[3].y);
}

TEST(SummarizeTraining, NanNamesTheLine)
{
    std::string m = metrics(3);
    m += "{\"iter\":3,\"l_pht\":NaN,\"l_depth\":0,\"l_op\":0,\"psnr_val\":null,\"secs\":0}\n";
    try {
        summarize_training(m);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
    }
    std::string nulls = metrics(5);
    nulls += "{\"iter\":5,\"l_pht\":0.1,\"l_depth\":null,\"l_op\":0,\"psnr_val\":null,\"secs\":0}\n";
    try {
        summarize_training(nulls);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("line 6"), std::string::npos) << e.what();
    }
}

TEST(SummarizeTraining, EmptyAndMalformed)
{
    const auto empty = summarize_training("");
    for (const auto& s : empty) EXPECT_TRUE(s.x.empty());
    EXPECT_THROW(summarize_training("{\"iter\":0}\n"), FormatError);
    EXPECT_THROW(summarize_training("not json\n"), FormatError);
}

TEST(PlotSeries, InvariantsAndRoundTrip)
{
    PlotSeries s{"a", {1, 2}, {3, 4}, "u"};
    EXPECT_EQ(PlotSeries::from_json(s.to_json()).to_json(), s.to_json());
    s.y.pop_back();
    EXPECT_THROW(s.validate(), InvalidArgument);
    s.y = {1, std::nan("")};
    EXPECT_THROW(s.to_json(), InvalidArgument);
}

TEST(BenchReport, JsonRoundTrip)
{
    bench::BenchReport r;
    r.scene = 3;
    r.width = r.height = 8;
    r.rows.push_back({"depth:4", "depth", 4, 0, 256, 0.0, 31.5, false});
    r.rows.push_back({"uniform:1024", "uniform", 1024, 0, 65536, 0.0, 99.0, true});
    EXPECT_EQ(bench::BenchReport::from_json(r.to_json()).to_json(), r.to_json());
    ASSERT_NE(r.find("depth:4"), nullptr);
    EXPECT_EQ(r.find("nope"), nullptr);
}

TEST(Bench, SmallRunCountsAndOrdering)
{
    bench::BenchOptions o;
    o.resolution = 8;
    o.samplers = {"depth:16", "hierarchical:8+16", "uniform:16"};
    o.wall_time = false;
    const bench::BenchReport r = bench::run_bench(o);
    ASSERT_EQ(r.rows.size(), 4u);
    for (std::size_t i = 1; i < r.rows.size(); ++i) EXPECT_LE(r.rows[i - 1].evaluations, r.rows[i].evaluations);
    EXPECT_EQ(r.find("depth:16")->evaluations, 64u * 16u);
    EXPECT_EQ(r.find("uniform:16")->evaluations, 64u * 16u);
    EXPECT_EQ(r.find("hierarchical:8+16")->evaluations, 64u * 24u);
    const bench::BenchRow* ref = r.find(bench::kReferenceSampler);
    ASSERT_NE(ref, nullptr);
    EXPECT_TRUE(ref->reference);
    EXPECT_EQ(ref->psnr, 99.0);
    EXPECT_EQ(ref->evaluations, 64u * 1024u);
    EXPECT_NO_THROW(summarize_bench(r.to_json()));

    o.workers = 3;
    EXPECT_EQ(bench::run_bench(o).to_json().dump(), r.to_json().dump());
    o.samplers = {"spiral:4"};
    EXPECT_THROW(bench::run_bench(o), InvalidArgument);
}

TEST(Bench, MeanFaceScene)
{
    const auto z = bench::bench_latents(0, 8);
    EXPECT_EQ(z.z_id, std::vector<double>(8, 0.0));
    EXPECT_EQ(z.z_cam, std::vector<double>(3, 0.0));
    EXPECT_EQ(z.z_ill, synth::mean_illumination());
    EXPECT_EQ(bench::bench_latents(5, 8), synth::sample_latents(5, 0, 8));
}

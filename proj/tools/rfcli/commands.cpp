#include "commands.hpp"

#include "rf/analysis/summary.hpp"
#include "rf/bench/bench.hpp"
#include "rf/core/error.hpp"
#include "rf/diagnostics/gradcheck_suite.hpp"
#include "rf/fitting/fit.hpp"
#include "rf/generator/generator.hpp"
#include "rf/synthscene/dataset.hpp"
#include "rf/synthscene/image_io.hpp"
#include "rf/tensorgrad/checkpoint.hpp"
#include "rf/tensorgrad/tape.hpp"
#include "rf/training/train.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace rfcli {

using namespace rf;
using nlohmann::json;

namespace {

json read_json(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(p.string() + ": " + e.what());
    }
}

void write_text(const fs::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out || !(out << text) || !out.flush()) throw IoError("cannot write " + p.string());
}

gen::Generator load_generator(const fs::path& p) { return gen::Generator::from_checkpoint(tg::read_checkpoint(p)); }

} // namespace

int cmd_dataset(const DatasetArgs& a)
{
    if (a.width == 0 || a.height == 0) throw UsageError("--width and --height must be positive");
    synth::DatasetOptions o;
    o.id_dim = a.id_dim;
    o.force = a.force;
    o.render.workers = a.workers;
    const synth::Manifest m = synth::generate_dataset(a.count, a.width, a.height, a.seed, a.out, o);
    fmt::print("wrote {} samples ({}x{}) to {}\n", m.samples.size(), m.width, m.height, a.out.string());
    return 0;
}

int cmd_train(const TrainArgs& a)
{
    train::TrainConfig cfg = train::TrainConfig::from_json(read_json(a.config), a.config.parent_path());
    if (a.workers) cfg.workers = *a.workers;
    const std::size_t every = std::max<std::size_t>(1, cfg.iterations / 20);
    const train::TrainResult r = train::train(cfg, [&](const train::IterationMetrics& m) {
        if (m.iter % every == 0 || m.iter + 1 == cfg.iterations)
            spdlog::info("iter {} l_pht {:.5f} l_depth {:.5f} l_op {:.4f}", m.iter, m.l_pht, m.l_depth, m.l_op);
    });
    fmt::print("trained {} iterations; checkpoint {}\n", r.metrics.size(), r.final_checkpoint.string());
    return 0;
}

int cmd_render(const RenderArgs& a)
{
    const gen::Generator g = load_generator(a.checkpoint);
    const synth::SceneLatents z = synth::latents_from_json(read_json(a.latents));
    z.validate(g.config().id_dim);
    const gen::Rendered r = g.forward(z);
    synth::write_png(a.out, r.image);
    if (a.depth) {
        Map d = r.d_mu;
        for (std::size_t i = 0; i < d.values.size(); ++i)
            if (r.alpha.values[i] < 0.5) d.values[i] = synth::kBackgroundDepth;
        synth::write_depth(*a.depth, d);
    }
    fmt::print("rendered {}x{} to {}\n", r.image.width, r.image.height, a.out.string());
    return 0;
}

int cmd_fit(const FitArgs& a)
{
    // Inputs are loaded and validated before anything is written.
    const gen::Generator g = load_generator(a.checkpoint);
    const Image target = synth::read_png(a.target);
    const fit::FitConfig cfg = a.config ? fit::FitConfig::from_json(read_json(*a.config)) : fit::FitConfig{};
    const synth::SceneLatents init =
        a.init ? synth::latents_from_json(read_json(*a.init)) : fit::init_latents(g.config().id_dim, cfg.ranges);
    if (fs::exists(a.out) && !(fs::is_directory(a.out) && fs::is_empty(a.out)) && !a.force)
        throw IoError(a.out.string() + " exists and is not empty (use --force to replace it)");

    fit::FitResult r = fit::fit_latents(g, target, init, cfg);
    spdlog::info("phase 1: loss {:.3e}, PSNR {:.2f} dB", r.loss, r.psnr);
    if (a.finetune) {
        r = fit::finetune_generator(g, target, r, cfg);
        spdlog::info("phase 2: loss {:.3e}, PSNR {:.2f} dB", r.loss, r.psnr);
    }

    const fs::path partial = fs::path(a.out.string() + ".partial");
    fs::remove_all(partial);
    fs::create_directories(partial);
    try {
        write_text(partial / "latents.json", synth::latents_to_json(r.latents).dump(1) + "\n");
        synth::write_png(partial / "render.png", r.image);
        std::string trace;
        for (const auto& s : r.trace) trace += s.to_json().dump() + "\n";
        write_text(partial / "trace.jsonl", trace);
        if (r.weights) tg::write_checkpoint(partial / "finetuned.rfck", r.weights->to_checkpoint());
        write_text(partial / "result.json",
                   json{{"loss", r.loss}, {"psnr", r.psnr}, {"finetuned", a.finetune}, {"config", cfg.to_json()}}.dump(1) + "\n");
        fs::remove_all(a.out);
        fs::rename(partial, a.out);
    } catch (...) {
        std::error_code ec;
        fs::remove_all(partial, ec);
        throw;
    }
    fmt::print("fit PSNR {:.2f} dB; bundle in {}\n", r.psnr, a.out.string());
    return 0;
}

int cmd_bench(const BenchArgs& a)
{
    if (a.resolution == 0) throw UsageError("--resolution must be positive");
    bench::BenchOptions o;
    o.scene = a.scene;
    o.resolution = a.resolution;
    if (!a.samplers.empty()) o.samplers = a.samplers;
    for (const auto& s : o.samplers) {
        try {
            vr::parse_sampler(s);
        } catch (const InvalidArgument& e) {
            throw UsageError(e.what());
        }
    }
    o.render_seed = a.seed;
    o.workers = a.workers;
    o.wall_time = !a.no_wall_time;
    o.generator = a.checkpoint;
    const bench::BenchReport r = bench::run_bench(o);
    write_text(a.out, r.to_json().dump(1) + "\n");
    fmt::print("{:<22} {:>12} {:>10} {:>9}\n", "sampler", "evaluations", "secs", "PSNR");
    for (const auto& row : r.rows)
        fmt::print("{:<22} {:>12} {:>10.3f} {:>9.2f}\n", row.sampler, row.evaluations, row.secs, row.psnr);
    return 0;
}

int cmd_gradcheck(const GradcheckArgs& a)
{
    const diag::SuiteConfig cfg = a.config ? diag::SuiteConfig::from_json(read_json(*a.config)) : diag::SuiteConfig{};
    tg::set_injected_fault(a.inject_fault);
    const std::vector<diag::CheckResult> results = diag::run_gradcheck_suite(cfg);
    tg::set_injected_fault("");
    std::vector<std::string> failed;
    json report = json::array();
    for (const auto& r : results) {
        fmt::print("{} {:<20} {:<10} max_rel_error {:.3e} (tol {:.0e}, {} coords)\n", r.passed() ? "PASS" : "FAIL", r.name,
                   r.group, r.max_rel_error, r.tolerance, r.coords);
        if (!r.passed()) failed.push_back(r.name);
        report.push_back(r.to_json());
    }
    if (a.out) write_text(*a.out, report.dump(1) + "\n");
    fmt::print("{}/{} checks passed\n", results.size() - failed.size(), results.size());
    if (failed.empty()) return 0;
    std::string names;
    for (const auto& n : failed) names += (names.empty() ? "" : ", ") + n;
    fmt::print(stderr, "gradient check failed for op: {}\n", names);
    return 1;
}

int cmd_summarize_bench(const SummarizeBenchArgs& a)
{
    const analysis::BenchSummary s = analysis::summarize_bench(read_json(a.report));
    write_text(a.csv, s.csv);
    write_text(a.json, s.plot_json().dump(1) + "\n");
    for (const auto& k : s.non_monotone) fmt::print(stderr, "warning: PSNR of '{}' drops as evaluations grow\n", k);
    fmt::print("{} series; csv {}; plot data {}\n", s.series.size(), a.csv.string(), a.json.string());
    return 0;
}

int cmd_summarize_train(const SummarizeTrainArgs& a)
{
    if (a.window == 0) throw UsageError("--window must be >= 1");
    std::ifstream in(a.metrics, std::ios::binary);
    if (!in) throw IoError("cannot read " + a.metrics.string());
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    const auto series = analysis::summarize_training(text, a.window);
    write_text(a.out, json{{"series", analysis::series_json(series)}}.dump(1) + "\n");
    fmt::print("{} points per loss curve; plot data {}\n", series.front().x.size(), a.out.string());
    return 0;
}

} // namespace rfcli

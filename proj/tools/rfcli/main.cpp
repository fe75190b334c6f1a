#include "commands.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <functional>

int main(int argc, char** argv)
{
    using namespace rfcli;
    spdlog::set_default_logger(spdlog::stderr_color_mt("rfcli"));
    spdlog::set_pattern("[%l] %v");

    CLI::App app{"Depth-guided radiance-field face generator: data, training, rendering, fitting and benchmarks"};
    app.require_subcommand(1);
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")->capture_default_str();

    std::function<int()> run;

    DatasetArgs ds;
    auto* c_ds = app.add_subcommand("dataset", "Render a labelled synthetic dataset");
    c_ds->add_option("--count", ds.count, "Number of samples")->required();
    c_ds->add_option("--width", ds.width)->capture_default_str();
    c_ds->add_option("--height", ds.height)->capture_default_str();
    c_ds->add_option("--seed", ds.seed)->capture_default_str();
    c_ds->add_option("--id-dim", ds.id_dim, "Identity latent dimension")->capture_default_str();
    c_ds->add_option("--out", ds.out, "Output directory")->required();
    c_ds->add_option("--workers", ds.workers)->capture_default_str();
    c_ds->add_flag("--force", ds.force, "Overwrite a non-empty output directory");
    c_ds->callback([&] { run = [&] { return cmd_dataset(ds); }; });

    TrainArgs tr;
    auto* c_tr = app.add_subcommand("train", "Train the generator from a JSON config");
    c_tr->add_option("--config", tr.config, "Training config (JSON)")->required()->check(CLI::ExistingFile);
    c_tr->add_option("--workers", tr.workers, "Override the config's worker count");
    c_tr->callback([&] { run = [&] { return cmd_train(tr); }; });

    RenderArgs rd;
    auto* c_rd = app.add_subcommand("render", "Render latents with a trained checkpoint");
    c_rd->add_option("--checkpoint", rd.checkpoint)->required();
    c_rd->add_option("--latents", rd.latents, "Scene latents (JSON)")->required();
    c_rd->add_option("--out", rd.out, "Output PNG")->required();
    c_rd->add_option("--depth", rd.depth, "Optional RFD1 depth output");
    c_rd->callback([&] { run = [&] { return cmd_render(rd); }; });

    FitArgs ft;
    auto* c_ft = app.add_subcommand("fit", "Recover latents (and optionally finetune) for a target image");
    c_ft->add_option("--checkpoint", ft.checkpoint)->required();
    c_ft->add_option("--target", ft.target, "Target PNG at model resolution")->required();
    c_ft->add_option("--out", ft.out, "Result bundle directory")->required();
    c_ft->add_option("--config", ft.config, "Fitting config (JSON)");
    c_ft->add_option("--init", ft.init, "Initial latents (JSON); default frontal, neutral, mean light");
    c_ft->add_flag("--finetune", ft.finetune, "Run the generator finetuning phase");
    c_ft->add_flag("--force", ft.force, "Replace an existing bundle");
    c_ft->callback([&] { run = [&] { return cmd_fit(ft); }; });

    BenchArgs bn;
    auto* c_bn = app.add_subcommand("bench", "Compare ray samplers on the oracle scene");
    c_bn->add_option("--scene", bn.scene, "Scene seed (0: mean face)")->capture_default_str();
    c_bn->add_option("--resolution", bn.resolution)->capture_default_str();
    c_bn->add_option("--samplers", bn.samplers, "uniform:K, hierarchical:Nc+Nf, depth:K")->delimiter(',');
    c_bn->add_option("--out", bn.out, "Report JSON")->required();
    c_bn->add_option("--seed", bn.seed, "Stratified jitter seed")->capture_default_str();
    c_bn->add_option("--workers", bn.workers)->capture_default_str();
    c_bn->add_option("--checkpoint", bn.checkpoint, "Also time a trained generator's one-pass render");
    c_bn->add_flag("--no-wall-time", bn.no_wall_time, "Record secs = 0 for byte-comparable reports");
    c_bn->callback([&] { run = [&] { return cmd_bench(bn); }; });

    GradcheckArgs gc;
    auto* c_gc = app.add_subcommand("gradcheck", "Finite-difference checks of every differentiable op");
    c_gc->add_option("--config", gc.config, "Suite config (JSON)");
    c_gc->add_option("--out", gc.out, "Per-check results (JSON)");
    c_gc->add_option("--inject-fault", gc.inject_fault)->group("");
    c_gc->callback([&] { run = [&] { return cmd_gradcheck(gc); }; });

    SummarizeBenchArgs sb;
    auto* c_sb = app.add_subcommand("summarize-bench", "Bench report to CSV and plot series");
    c_sb->add_option("--report", sb.report)->required();
    c_sb->add_option("--csv", sb.csv)->required();
    c_sb->add_option("--json", sb.json)->required();
    c_sb->callback([&] { run = [&] { return cmd_summarize_bench(sb); }; });

    SummarizeTrainArgs st;
    auto* c_st = app.add_subcommand("summarize-train", "Training metrics to plot series");
    c_st->add_option("--metrics", st.metrics)->required();
    c_st->add_option("--out", st.out)->required();
    c_st->add_option("--window", st.window, "Trailing moving-average window")->capture_default_str();
    c_st->callback([&] { run = [&] { return cmd_summarize_train(st); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    spdlog::set_level(spdlog::level::from_str(log_level));

    try {
        return run();
    } catch (const UsageError& e) {
        fmt::print(stderr, "usage error: {}\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
}

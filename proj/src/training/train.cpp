#include "rf/training/train.hpp"

#include "rf/core/error.hpp"
#include "rf/core/parallel.hpp"
#include "rf/core/rng.hpp"
#include "rf/tensorgrad/ops.hpp"
#include "rf/training/losses.hpp"
#include "rf/volrender/render_field.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace rf::train {

namespace fs = std::filesystem;
using tg::Tensor;

void TrainConfig::validate() const
{
    if (batch_size < 1) throw InvalidArgument("train: batch_size must be >= 1");
    if (!(lr > 0.0)) throw InvalidArgument("train: lr must be > 0");
    if (lambda_pht < 0.0 || lambda_depth < 0.0 || lambda_opacity < 0.0 || fg_weight < 0.0)
        throw InvalidArgument("train: loss weights must be >= 0");
    if (!(std_hinge_fraction > 0.0)) throw InvalidArgument("train: std_hinge_fraction must be > 0");
    if (workers < 1) throw InvalidArgument("train: workers must be >= 1");
    generator.validate();
}

nlohmann::json TrainConfig::to_json() const
{
    nlohmann::json j{{"version", 1},
                     {"dataset", dataset.string()},
                     {"out_dir", out_dir.string()},
                     {"batch_size", batch_size},
                     {"iterations", iterations},
                     {"lr", lr},
                     {"lambda_pht", lambda_pht},
                     {"lambda_depth", lambda_depth},
                     {"lambda_opacity", lambda_opacity},
                     {"fg_weight", fg_weight},
                     {"std_hinge_fraction", std_hinge_fraction},
                     {"seed", seed},
                     {"checkpoint_every", checkpoint_every},
                     {"val_every", val_every},
                     {"val_count", val_count},
                     {"wall_time", wall_time},
                     {"workers", workers},
                     {"generator", generator.to_json()}};
    if (resume) j["resume"] = resume->string();
    return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j, const fs::path& base)
{
    TrainConfig c;
    try {
        if (j.value("version", 1) != 1) throw InvalidArgument("train config: unsupported version");
        auto path = [&](const char* key) {
            fs::path p = j.at(key).get<std::string>();
            return p.is_relative() && !base.empty() ? base / p : p;
        };
        c.dataset = path("dataset");
        c.out_dir = path("out_dir");
        c.batch_size = j.value("batch_size", c.batch_size);
        c.iterations = j.value("iterations", c.iterations);
        c.lr = j.value("lr", c.lr);
        c.lambda_pht = j.value("lambda_pht", c.lambda_pht);
        c.lambda_depth = j.value("lambda_depth", c.lambda_depth);
        c.lambda_opacity = j.value("lambda_opacity", c.lambda_opacity);
        c.fg_weight = j.value("fg_weight", c.fg_weight);
        c.std_hinge_fraction = j.value("std_hinge_fraction", c.std_hinge_fraction);
        c.seed = j.value("seed", c.seed);
        c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
        c.val_every = j.value("val_every", c.val_every);
        c.val_count = j.value("val_count", c.val_count);
        c.wall_time = j.value("wall_time", c.wall_time);
        c.workers = j.value("workers", c.workers);
        if (j.contains("resume") && !j["resume"].is_null()) c.resume = path("resume");
        if (j.contains("generator")) c.generator = gen::GeneratorConfig::from_json(j["generator"]);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("train config: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::json IterationMetrics::to_json() const
{
    return {{"iter", iter},
            {"l_pht", l_pht},
            {"l_depth", l_depth},
            {"l_op", l_op},
            {"psnr_val", psnr_val ? nlohmann::json(*psnr_val) : nlohmann::json(nullptr)},
            {"secs", secs}};
}

std::string metrics_line(const IterationMetrics& m) { return m.to_json().dump(); }

TrainingSet load_training_set(const fs::path& dataset)
{
    TrainingSet ts;
    const fs::path manifest = fs::is_directory(dataset) ? dataset / synth::kManifestName : dataset;
    ts.root = manifest.parent_path();
    ts.manifest = synth::read_manifest(manifest);
    for (const auto& e : ts.manifest.samples) ts.samples.push_back(synth::load_sample(ts.root, e));
    return ts;
}

std::size_t batch_index(std::uint64_t seed, std::size_t n, std::size_t batch_size, std::size_t iter, std::size_t member)
{
    if (n == 0) throw InvalidArgument("batch_index: empty dataset");
    const std::size_t g = iter * batch_size + member;
    const std::size_t epoch = g / n;
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(stream_seed(seed, epoch));
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    return perm[g % n];
}

tg::Checkpoint training_checkpoint(const gen::Generator& g, const tg::AdamState& adam, std::size_t next_iter,
                                   const TrainConfig& cfg)
{
    tg::Checkpoint ck = g.to_checkpoint();
    ck.meta["train"] = {{"next_iter", next_iter}, {"adam_step", adam.step}, {"config", cfg.to_json()}};
    const auto params = g.parameters();
    for (std::size_t i = 0; i < params.size() && i < adam.m.size(); ++i) {
        ck.put("adam.m." + params[i]->name, adam.m[i]);
        ck.put("adam.v." + params[i]->name, adam.v[i]);
    }
    return ck;
}

namespace {

struct MemberResult {
    tg::Gradients grads;
    double l_pht = 0.0, l_depth = 0.0, l_op = 0.0, total = 0.0;
    std::string error;
};

MemberResult run_member(const gen::Generator& g, const synth::LoadedSample& s, const TrainConfig& cfg)
{
    MemberResult r;
    try {
        tg::Tape t;
        const gen::RenderVars out = g.render(t, gen::constant_latents(t, s.latents));
        const Tensor mask = foreground_mask(s.depth);
        const tg::Var lp = loss_photometric(out.image, gen::chw_from_image(s.image), mask, cfg.fg_weight);
        const tg::Var ld = loss_depth(out.d_mu, s.depth, mask);
        const double limit = cfg.std_hinge_fraction * (g.config().t_far() - g.config().t_near());
        const tg::Var lh = loss_std_hinge(out.d_std, limit);
        const tg::Var lo = loss_opacity(out.alpha, mask);
        const tg::Var total = tg::add(tg::add(tg::scale(lp, cfg.lambda_pht), tg::scale(tg::add(ld, lh), cfg.lambda_depth)),
                                      tg::scale(lo, cfg.lambda_opacity));
        r.l_pht = lp.value().item();
        r.l_depth = ld.value().item();
        r.l_op = lo.value().item();
        r.total = total.value().item();
        if (!std::isfinite(r.total)) throw NumericError("non-finite total loss");
        r.grads = t.backward(total);
    } catch (const NumericError& e) {
        r.error = e.what();
    }
    return r;
}

void write_diagnostic(const fs::path& out_dir, std::size_t iter, const std::vector<std::size_t>& batch,
                      const std::vector<MemberResult>& results, const synth::Manifest& manifest)
{
    nlohmann::json members = nlohmann::json::array();
    for (std::size_t j = 0; j < batch.size(); ++j) {
        const auto& r = results[j];
        members.push_back({{"index", batch[j]},
                           {"image", manifest.samples[batch[j]].image},
                           {"latents", synth::latents_to_json(manifest.samples[batch[j]].latents)},
                           {"l_pht", std::isfinite(r.l_pht) ? nlohmann::json(r.l_pht) : nlohmann::json(nullptr)},
                           {"l_depth", std::isfinite(r.l_depth) ? nlohmann::json(r.l_depth) : nlohmann::json(nullptr)},
                           {"l_op", std::isfinite(r.l_op) ? nlohmann::json(r.l_op) : nlohmann::json(nullptr)},
                           {"error", r.error}});
    }
    std::ofstream(out_dir / "diagnostic.json") << nlohmann::json{{"iter", iter}, {"batch", members}}.dump(1) << '\n';
}

} // namespace

double validation_psnr(const gen::Generator& g, const std::vector<synth::LoadedSample>& samples, std::size_t count)
{
    const std::size_t n = std::min(count, samples.size());
    if (n == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += vr::psnr(g.forward(samples[i].latents).image, samples[i].image);
    return acc / static_cast<double>(n);
}

double depth_error(const gen::Generator& g, const std::vector<synth::LoadedSample>& samples)
{
    if (samples.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& s : samples) acc += mean_foreground_depth_error(g.forward(s.latents).d_mu, s.depth);
    return acc / static_cast<double>(samples.size());
}

TrainResult train(const TrainConfig& cfg, const ProgressFn& progress)
{
    cfg.validate();
    const auto clock_start = std::chrono::steady_clock::now();
    TrainingSet data = load_training_set(cfg.dataset);
    if (data.samples.empty()) throw InvalidArgument("train: dataset is empty");
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        const auto& s = data.samples[i];
        if (s.image.width != cfg.generator.width || s.image.height != cfg.generator.height)
            throw InvalidArgument("train: sample " + std::to_string(i) + " is " + std::to_string(s.image.width) + "x" +
                                  std::to_string(s.image.height) + ", generator renders " +
                                  std::to_string(cfg.generator.width) + "x" + std::to_string(cfg.generator.height));
        if (s.latents.z_id.size() != cfg.generator.id_dim)
            throw InvalidArgument("train: sample " + std::to_string(i) + " has z_ID of dimension " +
                                  std::to_string(s.latents.z_id.size()) + ", generator expects " +
                                  std::to_string(cfg.generator.id_dim));
        s.latents.validate(cfg.generator.id_dim);
    }

    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw IoError("cannot create " + cfg.out_dir.string() + ": " + ec.message());

    std::size_t start = 0;
    TrainResult result{gen::Generator(cfg.generator), {}, {}};
    tg::AdamState adam{tg::AdamConfig{cfg.lr}, 0, {}, {}};
    if (cfg.resume) {
        const tg::Checkpoint ck = tg::read_checkpoint(*cfg.resume);
        result.generator = gen::Generator::from_checkpoint(ck);
        if (result.generator.config().to_json() != cfg.generator.to_json())
            throw InvalidArgument("train: resume checkpoint was made with a different generator config");
        if (ck.meta.contains("train")) {
            start = ck.meta["train"].value("next_iter", std::size_t{0});
            adam.step = ck.meta["train"].value("adam_step", std::uint64_t{0});
            for (const tg::Parameter* p : result.generator.parameters()) {
                const Tensor* m = ck.find("adam.m." + p->name);
                const Tensor* v = ck.find("adam.v." + p->name);
                if (!m || !v) {
                    adam.m.clear();
                    adam.v.clear();
                    break;
                }
                adam.m.push_back(*m);
                adam.v.push_back(*v);
            }
        }
        spdlog::info("resuming from {} at iteration {}", cfg.resume->string(), start);
    }

    gen::Generator& g = result.generator;
    const std::vector<tg::Parameter*> params = g.parameters();
    std::ofstream metrics(cfg.out_dir / "metrics.jsonl", std::ios::binary | std::ios::trunc);
    if (!metrics) throw IoError("cannot write metrics in " + cfg.out_dir.string());

    const std::size_t B = cfg.batch_size, N = data.samples.size();
    for (std::size_t it = start; it < cfg.iterations; ++it) {
        std::vector<std::size_t> batch(B);
        for (std::size_t j = 0; j < B; ++j) batch[j] = batch_index(cfg.seed, N, B, it, j);

        std::vector<MemberResult> results(B);
        parallel_for(B, cfg.workers, [&](std::size_t j) { results[j] = run_member(g, data.samples[batch[j]], cfg); });

        IterationMetrics m;
        m.iter = it;
        bool finite = true;
        for (const auto& r : results) finite = finite && r.error.empty() && std::isfinite(r.total);
        if (!finite) {
            write_diagnostic(cfg.out_dir, it, batch, results, data.manifest);
            throw NumericError("train: non-finite loss at iteration " + std::to_string(it) + "; batch dumped to " +
                               (cfg.out_dir / "diagnostic.json").string());
        }
        tg::Gradients grads;
        for (const auto& r : results) {
            grads.accumulate(r.grads, 1.0 / static_cast<double>(B));
            m.l_pht += r.l_pht / static_cast<double>(B);
            m.l_depth += r.l_depth / static_cast<double>(B);
            m.l_op += r.l_op / static_cast<double>(B);
        }
        tg::adam_step(params, grads, adam);

        const bool last = it + 1 == cfg.iterations;
        if (cfg.val_every > 0 && ((it + 1) % cfg.val_every == 0 || last))
            m.psnr_val = validation_psnr(g, data.samples, cfg.val_count);
        if (cfg.wall_time)
            m.secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
        metrics << metrics_line(m) << '\n';
        metrics.flush();
        result.metrics.push_back(m);
        if (progress) progress(m);

        if (cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0 && !last) {
            char name[32];
            std::snprintf(name, sizeof name, "ckpt_%06zu.rfck", it + 1);
            tg::write_checkpoint(cfg.out_dir / name, training_checkpoint(g, adam, it + 1, cfg));
        }
    }
    if (!metrics) throw IoError("metrics write failed");
    result.final_checkpoint = cfg.out_dir / "final.rfck";
    tg::write_checkpoint(result.final_checkpoint, training_checkpoint(g, adam, std::max(start, cfg.iterations), cfg));
    return result;
}

} // namespace rf::train

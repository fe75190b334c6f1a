#include "rf/fitting/fit.hpp"

#include "rf/core/error.hpp"
#include "rf/tensorgrad/adam.hpp"
#include "rf/tensorgrad/ops.hpp"
#include "rf/volrender/render_field.hpp"

#include <cmath>

namespace rf::fit {

using tg::Parameter;
using tg::Shape;
using tg::Tape;
using tg::Tensor;
using tg::Var;

tg::Var FeatureLoss::distance(const std::vector<Var>& a, const std::vector<Var>& b) const
{
    if (a.size() != b.size() || a.empty()) throw InvalidArgument(name() + ": feature sets differ in length");
    Var acc = tg::mse(a[0], b[0]);
    for (std::size_t i = 1; i < a.size(); ++i) acc = tg::add(acc, tg::mse(a[i], b[i]));
    return acc;
}

std::vector<Var> PyramidL2::features(Var image) const
{
    std::vector<Var> f{image};
    for (std::size_t l = 1; l < levels_; ++l) {
        const Shape& s = f.back().shape();
        if (s[1] % 2 || s[2] % 2) break;
        f.push_back(tg::avgpool2x(f.back()));
    }
    return f;
}

void FitConfig::validate() const
{
    if (!(finetune_divisor > 0.0)) throw InvalidArgument("fit: finetune divisor must be > 0");
    if (!(lr > 0.0)) throw InvalidArgument("fit: lr must be > 0");
    if (lambda_pht < 0.0 || lambda_prior < 0.0 || lambda_feature < 0.0) throw InvalidArgument("fit: weights must be >= 0");
}

nlohmann::json FitConfig::to_json() const
{
    return {{"version", 1},
            {"latent_steps", latent_steps},
            {"finetune_steps", finetune_steps},
            {"lr", lr},
            {"finetune_divisor", finetune_divisor},
            {"lambda_pht", lambda_pht},
            {"lambda_prior", lambda_prior},
            {"lambda_feature", lambda_feature},
            {"fit_identity", fit_identity}};
}

FitConfig FitConfig::from_json(const nlohmann::json& j)
{
    FitConfig c;
    try {
        c.latent_steps = j.value("latent_steps", c.latent_steps);
        c.finetune_steps = j.value("finetune_steps", c.finetune_steps);
        c.lr = j.value("lr", c.lr);
        c.finetune_divisor = j.value("finetune_divisor", c.finetune_divisor);
        c.lambda_pht = j.value("lambda_pht", c.lambda_pht);
        c.lambda_prior = j.value("lambda_prior", c.lambda_prior);
        c.lambda_feature = j.value("lambda_feature", c.lambda_feature);
        c.fit_identity = j.value("fit_identity", c.fit_identity);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("fit config: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::json FitStep::to_json() const { return {{"step", step}, {"phase", phase}, {"loss", loss}, {"psnr", psnr}}; }

synth::SceneLatents init_latents(std::size_t id_dim, const synth::LatentRanges& ranges)
{
    synth::SceneLatents z;
    z.z_id.assign(id_dim, 0.0);
    z.z_ill = synth::mean_illumination(ranges);
    return z;
}

namespace {

struct LatentParams {
    Parameter id{"z_id", {}}, exp{"z_exp", {}}, cam{"z_cam", {}}, ill{"z_ill", {}};

    explicit LatentParams(const synth::SceneLatents& z)
    {
        id.value = Tensor(Shape{z.z_id.size()}, z.z_id);
        exp.value = Tensor(Shape{z.z_exp.size()}, z.z_exp);
        cam.value = Tensor(Shape{z.z_cam.size()}, z.z_cam);
        ill.value = Tensor(Shape{z.z_ill.size()}, z.z_ill);
    }

    synth::SceneLatents latents() const
    {
        auto vec = [](const Tensor& t) {
            const auto v = t.values();
            return std::vector<double>(v.begin(), v.end());
        };
        return {vec(id.value), vec(exp.value), vec(cam.value), vec(ill.value)};
    }

    void project(const synth::LatentRanges& r)
    {
        synth::SceneLatents z = latents();
        synth::clamp_latents(z, r);
        *this = LatentParams(z);
    }

    std::vector<Parameter*> trainable(bool with_id)
    {
        std::vector<Parameter*> v;
        if (with_id) v.push_back(&id);
        v.insert(v.end(), {&exp, &cam, &ill});
        return v;
    }
};

struct Evaluation {
    double loss = 0.0;
    Tensor image;
    tg::Gradients grads;
};

Evaluation evaluate(const gen::Generator& g, const Tensor& target, LatentParams& lp, const FitConfig& cfg,
                    const FeatureLoss* plugin, bool track_weights, bool want_grads)
{
    Tape t;
    if (!track_weights)
        for (const Parameter* p : g.parameters()) t.freeze(*p);
    gen::LatentVars z{cfg.fit_identity ? t.param(lp.id) : t.constant(lp.id.value), t.param(lp.exp), t.param(lp.cam),
                      t.param(lp.ill)};
    const gen::RenderVars r = g.render(t, z);
    Var loss = tg::scale(tg::mse(r.image, t.constant(target)), cfg.lambda_pht);
    if (cfg.lambda_prior > 0.0) loss = tg::add(loss, tg::scale(tg::sum(tg::square(z.z_id)), cfg.lambda_prior));
    if (plugin && cfg.lambda_feature > 0.0) {
        const Var tgt = t.constant(target);
        loss = tg::add(loss, tg::scale(plugin->distance(plugin->features(r.image), plugin->features(tgt)), cfg.lambda_feature));
    }
    Evaluation e;
    e.loss = loss.value().item();
    if (!std::isfinite(e.loss)) throw NumericError("fit: non-finite loss");
    e.image = r.image.value();
    if (want_grads) e.grads = t.backward(loss);
    return e;
}

void check_target(const gen::Generator& g, const Image& target)
{
    if (target.width != g.config().width || target.height != g.config().height)
        throw InvalidArgument("fit: target is " + std::to_string(target.width) + "x" + std::to_string(target.height) +
                              ", model renders " + std::to_string(g.config().width) + "x" +
                              std::to_string(g.config().height));
}

struct Best {
    double loss = HUGE_VAL;
    synth::SceneLatents latents;
    Tensor image;
    std::optional<gen::Generator> weights;
};

void record(FitResult& res, Best& best, const Evaluation& e, const LatentParams& lp, const Image& target, int phase,
            const gen::Generator* weights)
{
    const double p = vr::psnr(gen::image_from_chw(e.image), target);
    res.trace.push_back({res.trace.size(), phase, e.loss, p});
    if (e.loss < best.loss) {
        best.loss = e.loss;
        best.latents = lp.latents();
        best.image = e.image;
        if (weights) best.weights = *weights;
    }
}

void finish(FitResult& res, Best& best, const Image& target)
{
    res.latents = best.latents;
    res.loss = best.loss;
    res.image = gen::image_from_chw(best.image);
    res.psnr = vr::psnr(res.image, target);
    if (best.weights) res.weights = std::move(best.weights);
}

} // namespace

double fitting_loss(const gen::Generator& model, const Image& target, const synth::SceneLatents& z, const FitConfig& cfg,
                    const FeatureLoss* plugin)
{
    check_target(model, target);
    LatentParams lp(z);
    return evaluate(model, gen::chw_from_image(target), lp, cfg, plugin, false, false).loss;
}

FitResult fit_latents(const gen::Generator& model, const Image& target, const synth::SceneLatents& init,
                      const FitConfig& cfg, const FeatureLoss* plugin)
{
    cfg.validate();
    check_target(model, target);
    init.validate(model.config().id_dim);
    const Tensor tgt = gen::chw_from_image(target);

    LatentParams lp(init);
    lp.project(cfg.ranges);
    tg::AdamState adam{tg::AdamConfig{cfg.lr}, 0, {}, {}};
    FitResult res;
    Best best;
    const std::vector<Parameter*> params = lp.trainable(cfg.fit_identity);
    for (std::size_t s = 0; s < cfg.latent_steps; ++s) {
        const Evaluation e = evaluate(model, tgt, lp, cfg, plugin, false, true);
        record(res, best, e, lp, target, 1, nullptr);
        tg::adam_step(params, e.grads, adam);
        lp.project(cfg.ranges);
    }
    if (cfg.latent_steps == 0) record(res, best, evaluate(model, tgt, lp, cfg, plugin, false, false), lp, target, 1, nullptr);
    finish(res, best, target);
    if (cfg.latent_steps == 0) res.trace.clear();
    return res;
}

FitResult finetune_generator(const gen::Generator& model, const Image& target, const FitResult& phase1,
                             const FitConfig& cfg, const FeatureLoss* plugin)
{
    cfg.validate();
    check_target(model, target);
    const Tensor tgt = gen::chw_from_image(target);

    gen::Generator g = model;
    LatentParams lp(phase1.latents);
    tg::AdamState latent_adam{tg::AdamConfig{cfg.lr}, 0, {}, {}};
    tg::AdamState weight_adam{tg::AdamConfig{cfg.lr / cfg.finetune_divisor}, 0, {}, {}};
    const std::vector<Parameter*> latent_params = lp.trainable(cfg.fit_identity);
    const std::vector<Parameter*> weight_params = g.parameters();

    FitResult res;
    res.trace = phase1.trace;
    Best best;
    for (std::size_t s = 0; s < cfg.finetune_steps; ++s) {
        const Evaluation e = evaluate(g, tgt, lp, cfg, plugin, true, true);
        record(res, best, e, lp, target, 2, &g);
        tg::adam_step(latent_params, e.grads, latent_adam);
        tg::adam_step(weight_params, e.grads, weight_adam);
        lp.project(cfg.ranges);
    }
    if (cfg.finetune_steps == 0) {
        const Evaluation e = evaluate(g, tgt, lp, cfg, plugin, false, false);
        const std::size_t n = res.trace.size();
        record(res, best, e, lp, target, 2, &g);
        res.trace.resize(n);
    }
    finish(res, best, target);
    return res;
}

} // namespace rf::fit

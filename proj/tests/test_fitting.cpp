#include "rf/core/error.hpp"
#include "rf/fitting/fit.hpp"
#include "rf/synthscene/dataset.hpp"
#include "rf/tensorgrad/checkpoint.hpp"
#include "rf/tensorgrad/ops.hpp"
#include "rf/volrender/render_field.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

using namespace rf;
using namespace rf::fit;
using tg::Tape;
using tg::Tensor;

namespace {

gen::Generator small_model()
{
    gen::GeneratorConfig c;
    c.width = c.height = 16;
    c.blocks = 2;
    c.K = 4;
    c.base_channels = 8;
    c.min_channels = 4;
    c.id_dim = 8;
    c.mapping_width = 8;
    c.cond_channels = 4;
    c.init_seed = 21;
    return gen::Generator(c);
}

std::vector<std::uint8_t> weight_bytes(const gen::Generator& g) { return tg::encode_checkpoint(g.to_checkpoint()); }

double max_weight_change(const gen::Generator& a, const gen::Generator& b)
{
    const auto pa = a.parameters(), pb = b.parameters();
    double m = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i)
        for (std::size_t k = 0; k < pa[i]->value.size(); ++k)
            m = std::max(m, std::fabs(pa[i]->value[k] - pb[i]->value[k]));
    return m;
}

synth::SceneLatents perturbed(const synth::SceneLatents& z, std::uint64_t seed)
{
    Rng rng(seed);
    synth::SceneLatents p = z;
    for (double& v : p.z_exp) v += 0.3 * rng.normal();
    for (double& v : p.z_cam) v += 0.3 * rng.normal();
    for (double& v : p.z_ill) v += 0.3 * rng.normal();
    synth::clamp_latents(p);
    return p;
}

FitConfig quick(std::size_t phase1, std::size_t phase2)
{
    FitConfig c;
    c.latent_steps = phase1;
    c.finetune_steps = phase2;
    return c;
}

bool inside_box(const synth::SceneLatents& z, const synth::LatentRanges& r)
{
    for (double v : z.z_exp)
        if (v < -1.0 || v > 1.0) return false;
    for (std::size_t i = 0; i < 2; ++i)
        if (z.z_cam[i] < r.cam_angle.lo || z.z_cam[i] > r.cam_angle.hi) return false;
    if (z.z_cam[2] < r.cam_log_radius.lo || z.z_cam[2] > r.cam_log_radius.hi) return false;
    for (std::size_t i = 0; i < 2; ++i)
        if (z.z_ill[i] < r.fit_light_angle.lo || z.z_ill[i] > r.fit_light_angle.hi) return false;
    for (std::size_t i = 2; i < 8; ++i)
        if (z.z_ill[i] < r.fit_rgb.lo || z.z_ill[i] > r.fit_rgb.hi) return false;
    return true;
}

} // namespace

TEST(InitLatents, FrontalZeroExpressionMeanLight)
{
    const synth::LatentRanges r;
    const synth::SceneLatents z = init_latents(8, r);
    EXPECT_NO_THROW(z.validate(8));
    EXPECT_EQ(z.z_exp, std::vector<double>(synth::kExpDim, 0.0));
    EXPECT_EQ(z.z_cam, std::vector<double>(3, 0.0));
    EXPECT_EQ(z.z_id, std::vector<double>(8, 0.0));
    const double light = (0.6 + 1.2) / 2, ambient = (0.15 + 0.45) / 2;
    const std::vector<double> expect{0.0, (-0.5 + 0.7) / 2, light, light, light, ambient, ambient, ambient};
    ASSERT_EQ(z.z_ill.size(), expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(z.z_ill[i], expect[i], 1e-15);
}

TEST(FitConfig, JsonRoundTripAndValidation)
{
    FitConfig c = quick(7, 3);
    c.lambda_prior = 0.5;
    c.fit_identity = false;
    EXPECT_EQ(FitConfig::from_json(c.to_json()).to_json(), c.to_json());
    auto j = c.to_json();
    j["finetune_divisor"] = 0.0;
    EXPECT_THROW(FitConfig::from_json(j), InvalidArgument);
    j = c.to_json();
    j["lambda_pht"] = -1.0;
    EXPECT_THROW(FitConfig::from_json(j), InvalidArgument);
    j = c.to_json();
    j["latent_steps"] = "many";
    EXPECT_THROW(FitConfig::from_json(j), InvalidArgument);
}

TEST(PyramidL2, LevelsAndDistance)
{
    const PyramidL2 p(3);
    Rng rng(1);
    Tape t;
    const Tensor a = testutil::uniform_tensor({3, 8, 8}, rng, 0.0, 1.0);
    const auto f = p.features(t.constant(a));
    ASSERT_EQ(f.size(), 3u);
    EXPECT_EQ(f[1].shape(), (tg::Shape{3, 4, 4}));
    EXPECT_EQ(f[2].shape(), (tg::Shape{3, 2, 2}));
    double mean_a = 0.0;
    for (double v : a.values()) mean_a += v;
    double mean_f2 = 0.0;
    for (double v : f[2].value().values()) mean_f2 += v;
    EXPECT_NEAR(mean_a / 192.0, mean_f2 / 12.0, 1e-14);
    EXPECT_EQ(p.distance(f, p.features(t.constant(a))).value().item(), 0.0);

    Tensor b = a;
    for (double& v : b.values()) v += 0.1;
    // A constant offset survives average pooling unchanged at every level.
    EXPECT_NEAR(p.distance(f, p.features(t.constant(b))).value().item(), 3 * 0.01, 1e-14);
}

TEST(PyramidL2, StopsAtOddResolution)
{
    Tape t;
    EXPECT_EQ(PyramidL2(5).features(t.constant(Tensor({3, 6, 6}))).size(), 2u);
}

TEST(FittingLoss, PluginAddsWeightedDistance)
{
    const gen::Generator g = small_model();
    const auto z = synth::sample_latents(3, 0, 8);
    const Image target = g.forward(synth::sample_latents(3, 1, 8)).image;
    FitConfig c;
    c.lambda_feature = 0.7;
    const PyramidL2 plugin(2);
    const double base = fitting_loss(g, target, z, c);
    const double with = fitting_loss(g, target, z, c, &plugin);
    Tape t;
    const auto a = plugin.features(t.constant(gen::chw_from_image(g.forward(z).image)));
    const auto b = plugin.features(t.constant(gen::chw_from_image(target)));
    EXPECT_NEAR(with - base, 0.7 * plugin.distance(a, b).value().item(), 1e-12);

    double prior = 0.0;
    for (double v : z.z_id) prior += v * v;
    EXPECT_NEAR(base, vr::mse(g.forward(z).image, target) + c.lambda_prior * prior, 1e-12);
}

TEST(FitLatents, FixedPointAtTruth)
{
    const gen::Generator g = small_model();
    const auto zs = synth::sample_latents(5, 2, 8);
    const Image target = g.forward(zs).image;
    FitConfig c = quick(10, 0);
    c.lambda_prior = 0.0;
    const FitResult r = fit_latents(g, target, zs, c);
    ASSERT_EQ(r.trace.size(), 10u);
    EXPECT_LT(r.trace.front().loss, 1e-20);
    const auto drift = [](const std::vector<double>& a, const std::vector<double>& b) {
        double m = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
        return m;
    };
    EXPECT_LT(drift(r.latents.z_id, zs.z_id), 1e-6);
    EXPECT_LT(drift(r.latents.z_exp, zs.z_exp), 1e-6);
    EXPECT_LT(drift(r.latents.z_cam, zs.z_cam), 1e-6);
    EXPECT_LT(drift(r.latents.z_ill, zs.z_ill), 1e-6);
}

TEST(FitLatents, WeightsUntouched)
{
    const gen::Generator g = small_model();
    const auto before = weight_bytes(g);
    const auto zs = synth::sample_latents(5, 3, 8);
    const FitResult r = fit_latents(g, g.forward(zs).image, perturbed(zs, 1), quick(15, 0), nullptr);
    EXPECT_TRUE(weight_bytes(g) == before);
    EXPECT_FALSE(r.weights.has_value());
}

TEST(FitLatents, ReducesLossFromPerturbedInit)
{
    const gen::Generator g = small_model();
    const auto zs = synth::sample_latents(5, 4, 8);
    const Image target = g.forward(zs).image;
    const FitResult r = fit_latents(g, target, perturbed(zs, 2), quick(40, 0));
    EXPECT_LT(r.loss, r.trace.front().loss);
    EXPECT_NEAR(r.psnr, vr::psnr(r.image, target), 1e-12);
    EXPECT_NEAR(r.loss, fitting_loss(g, target, r.latents, quick(40, 0)), 1e-12);
}

TEST(FitLatents, BestIterateIsTraceMinimum)
{
    const gen::Generator g = small_model();
    const auto zs = synth::sample_latents(6, 0, 8);
    const Image target = g.forward(zs).image;
    FitConfig c = quick(0, 0);
    c.lr = 0.2;  // oscillates
    double prev = HUGE_VAL;
    for (std::size_t n : {1u, 5u, 10u, 20u}) {
        c.latent_steps = n;
        const FitResult r = fit_latents(g, target, perturbed(zs, 3), c);
        double m = HUGE_VAL;
        for (const auto& s : r.trace) m = std::min(m, s.loss);
        EXPECT_EQ(r.loss, m);
        EXPECT_LE(r.loss, prev);
        prev = r.loss;
    }
}

TEST(FitLatents, LatentsStayInsideBox)
{
    const gen::Generator g = small_model();
    const auto zs = synth::sample_latents(6, 1, 8);
    FitConfig c = quick(0, 0);
    c.lr = 2.0;
    for (std::size_t n : {1u, 2u, 3u, 6u, 12u}) {
        c.latent_steps = n;
        const FitResult r = fit_latents(g, g.forward(zs).image, perturbed(zs, n), c);
        EXPECT_NO_THROW(r.latents.validate(8));
        EXPECT_TRUE(inside_box(r.latents, c.ranges)) << n;
    }
}

TEST(FitLatents, FrozenIdentity)
{
    const gen::Generator g = small_model();
    const auto zs = synth::sample_latents(6, 2, 8);
    FitConfig c = quick(8, 0);
    c.fit_identity = false;
    const auto init = perturbed(zs, 4);
    EXPECT_EQ(fit_latents(g, g.forward(zs).image, init, c).latents.z_id, init.z_id);
}

TEST(FitLatents, RejectsBadInputs)
{
    const gen::Generator g = small_model();
    const auto z = init_latents(8);
    EXPECT_THROW(fit_latents(g, Image(8, 8), z, quick(1, 0)), InvalidArgument);
    Image nan_target(16, 16, 0.5);
    nan_target.rgb[7] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(fit_latents(g, nan_target, z, quick(1, 0)), NumericError);
    EXPECT_THROW(fit_latents(g, Image(16, 16), init_latents(5), quick(1, 0)), InvalidArgument);
}

TEST(Finetune, TraceContinuesPhaseOne)
{
    const gen::Generator g = small_model();
    const auto zs = synth::sample_latents(7, 0, 8);
    const Image target = g.forward(zs).image;
    const FitConfig c = quick(6, 4);
    const FitResult r1 = fit_latents(g, target, perturbed(zs, 5), c);
    const FitResult r2 = finetune_generator(g, target, r1, c);
    ASSERT_EQ(r2.trace.size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_EQ(r2.trace[i].step, i);
        EXPECT_EQ(r2.trace[i].phase, i < 6 ? 1 : 2);
    }
    ASSERT_TRUE(r2.weights.has_value());
}

TEST(Finetune, NeverWorseThanPhaseOne)
{
    const gen::Generator g = small_model();
    for (std::size_t i = 0; i < 3; ++i) {
        const auto zs = synth::sample_latents(7, i + 1, 8);
        const Image target = g.forward(zs).image;
        const FitConfig c = quick(20, 10);
        const FitResult r1 = fit_latents(g, target, perturbed(zs, 10 + i), c);
        const FitResult r2 = finetune_generator(g, target, r1, c);
        EXPECT_LE(r2.loss, r1.loss);
    }
}

TEST(Finetune, HugeDivisorFreezesWeights)
{
    const gen::Generator g = small_model();
    const auto before = weight_bytes(g);
    const auto zs = synth::sample_latents(8, 0, 8);
    const Image target = g.forward(zs).image;
    FitConfig c = quick(5, 10);
    c.finetune_divisor = 1e9;
    const FitResult r1 = fit_latents(g, target, perturbed(zs, 6), c);
    const FitResult r2 = finetune_generator(g, target, r1, c);
    ASSERT_TRUE(r2.weights.has_value());
    EXPECT_LT(max_weight_change(*r2.weights, g), 1e-6);
    EXPECT_TRUE(weight_bytes(g) == before);

    c.finetune_divisor = 200.0;
    const FitResult r3 = finetune_generator(g, target, r1, c);
    EXPECT_GT(max_weight_change(*r3.weights, g), 1e-6);
    EXPECT_TRUE(weight_bytes(g) == before);
}

TEST(Fit, ConcurrentFitsOnSeparateCopiesMatchSequential)
{
    const gen::Generator g = small_model();
    const auto zs = synth::sample_latents(9, 0, 8);
    const Image target = g.forward(zs).image;
    const FitConfig c = quick(6, 3);
    const auto run = [&](const gen::Generator& m) { return finetune_generator(m, target, fit_latents(m, target, perturbed(zs, 7), c), c); };
    const FitResult seq = run(g);
    const gen::Generator copy_a = g, copy_b = g;
    FitResult a, b;
    std::thread ta([&] { a = run(copy_a); });
    std::thread tb([&] { b = run(copy_b); });
    ta.join();
    tb.join();
    for (const FitResult* r : {&a, &b}) {
        EXPECT_EQ(r->latents, seq.latents);
        EXPECT_EQ(r->loss, seq.loss);
        EXPECT_EQ(r->image.rgb, seq.image.rgb);
    }
}

#include "rf/core/error.hpp"
#include "rf/tensorgrad/checkpoint.hpp"
#include "rf/tensorgrad/gradcheck.hpp"
#include "rf/tensorgrad/ops.hpp"
#include "rf/training/losses.hpp"
#include "rf/training/train.hpp"
#include "rf/volrender/render_field.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

using namespace rf;
using namespace rf::train;
using tg::Parameter;
using tg::Shape;
using tg::Tape;
using tg::Tensor;
using tg::Var;
namespace fs = std::filesystem;

namespace {

constexpr std::size_t kIdDim = 8;

gen::GeneratorConfig small_generator()
{
    gen::GeneratorConfig c;
    c.width = c.height = 16;
    c.blocks = 2;
    c.K = 4;
    c.base_channels = 8;
    c.min_channels = 4;
    c.id_dim = kIdDim;
    c.mapping_width = 8;
    c.cond_channels = 4;
    c.init_seed = 1;
    return c;
}

// Four 16x16 samples, generated once per process.
const fs::path& small_dataset()
{
    static const fs::path dir = [] {
        const fs::path d = testutil::scratch_dir("train_ds16");
        synth::DatasetOptions o;
        o.id_dim = kIdDim;
        synth::generate_dataset(4, 16, 16, 11, d, o);
        return d;
    }();
    return dir;
}

TrainConfig small_config(const std::string& out)
{
    TrainConfig c;
    c.dataset = small_dataset();
    c.out_dir = testutil::scratch_dir(out);
    c.iterations = 6;
    c.batch_size = 2;
    c.val_every = 3;
    c.wall_time = false;
    c.generator = small_generator();
    return c;
}

std::vector<std::string> lines_of(const fs::path& p)
{
    std::istringstream in(testutil::slurp(p));
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

// Checkpoint bytes with the run config stripped (out_dir, workers and resume differ between runs).
std::vector<std::uint8_t> state_bytes(const fs::path& p)
{
    tg::Checkpoint ck = tg::read_checkpoint(p);
    ck.meta["train"].erase("config");
    return tg::encode_checkpoint(ck);
}

TrainResult run(const TrainConfig& c) { return rf::train::train(c); }

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Map depth_map(std::size_t w, std::size_t h, std::initializer_list<double> v)
{
    Map m(w, h);
    std::copy(v.begin(), v.end(), m.values.begin());
    return m;
}

} // namespace

TEST(LossPhotometric, IdenticalIsZero)
{
    Rng rng(1);
    const Tensor a = testutil::uniform_tensor({3, 4, 5}, rng, 0.0, 1.0);
    Tape t;
    EXPECT_EQ(loss_photometric(t.constant(a), a, Tensor()).value().item(), 0.0);
}

TEST(LossPhotometric, ConstantOffset)
{
    Rng rng(2);
    const Tensor target = testutil::uniform_tensor({3, 4, 4}, rng, 0.0, 0.8);
    Tensor pred = target;
    for (double& v : pred.values()) v += 0.1;
    Tape t;
    EXPECT_NEAR(loss_photometric(t.constant(pred), target, Tensor()).value().item(), 0.01, 1e-15);
}

TEST(LossPhotometric, GradientMatchesAnalyticForm)
{
    Rng rng(3);
    const Tensor target = testutil::uniform_tensor({3, 3, 2}, rng, 0.0, 1.0);
    Parameter pred{"pred", testutil::uniform_tensor({3, 3, 2}, rng, 0.0, 1.0)};
    Tape t;
    const auto g = t.backward(loss_photometric(t.param(pred), target, Tensor()));
    const double count = static_cast<double>(target.size());
    for (std::size_t i = 0; i < target.size(); ++i)
        EXPECT_NEAR(g.at(pred)[i], 2.0 * (pred.value[i] - target[i]) / count, 1e-15);
    std::vector<Parameter*> ps{&pred};
    const auto f = [&](Tape& tt) { return loss_photometric(tt.param(pred), target, Tensor()); };
    EXPECT_LT(tg::grad_check(f, ps).max_rel_error, 1e-8);
}

TEST(LossPhotometric, ForegroundReweighting)
{
    const Tensor target(Shape{3, 1, 2});
    Tensor pred(Shape{3, 1, 2});
    for (std::size_t c = 0; c < 3; ++c) {
        pred[c * 2 + 0] = 0.1;  // foreground pixel
        pred[c * 2 + 1] = 0.2;  // background pixel
    }
    Tensor mask(Shape{2});
    mask[0] = 1.0;
    Tape t;
    const double expect = (3 * 2.0 * 0.01 + 3 * 0.04) / 6.0;
    EXPECT_NEAR(loss_photometric(t.constant(pred), target, mask, 2.0).value().item(), expect, 1e-15);
}

TEST(LossPhotometric, ShapeMismatchThrows)
{
    Tape t;
    EXPECT_THROW(loss_photometric(t.constant(Tensor({3, 2, 2})), Tensor({3, 2, 3}), Tensor()), InvalidArgument);
}

TEST(LossDepth, Examples)
{
    const double inf = std::numeric_limits<double>::infinity();
    const Map gt = depth_map(2, 2, {2.0, 2.5, inf, 3.0});
    const Tensor mask = foreground_mask(gt);
    EXPECT_EQ(mask[2], 0.0);
    Tape t;
    Tensor perfect(Shape{4});
    perfect[0] = 2.0, perfect[1] = 2.5, perfect[2] = 9.0, perfect[3] = 3.0;
    EXPECT_EQ(loss_depth(t.constant(perfect), gt, mask).value().item(), 0.0);

    const double delta = 0.07;
    Tensor off = perfect;
    for (double& v : off.values()) v += delta;
    EXPECT_NEAR(loss_depth(t.constant(off), gt, mask).value().item(), delta * delta, 1e-15);

    const Map empty = depth_map(2, 2, {inf, inf, inf, inf});
    EXPECT_EQ(loss_depth(t.constant(off), empty, foreground_mask(empty)).value().item(), 0.0);
    EXPECT_THROW(loss_depth(t.constant(Tensor({3})), gt, mask), InvalidArgument);
}

TEST(LossOpacity, Examples)
{
    Tensor mask(Shape{6});
    mask[0] = mask[2] = mask[5] = 1.0;
    Tape t;
    const double exact = loss_opacity(t.constant(mask), mask).value().item();
    EXPECT_NEAR(exact, -std::log1p(-kOpacityClamp), 1e-15);
    EXPECT_LT(exact, 1.1e-6);
    EXPECT_NEAR(loss_opacity(t.constant(Tensor(Shape{6}, 0.5)), mask).value().item(), std::log(2.0), 1e-14);
}

TEST(LossOpacity, GradientSignOnForeground)
{
    Rng rng(4);
    Tensor mask(Shape{40});
    for (std::size_t i = 0; i < 40; ++i) mask[i] = i % 3 == 0;
    Parameter alpha{"alpha", testutil::uniform_tensor({40}, rng, 0.01, 0.99)};
    Tape t;
    const auto g = t.backward(loss_opacity(t.param(alpha), mask));
    for (std::size_t i = 0; i < 40; ++i) {
        if (mask[i] > 0.5)
            EXPECT_LT(g.at(alpha)[i], 0.0);
        else
            EXPECT_GT(g.at(alpha)[i], 0.0);
    }
}

TEST(LossStdHinge, OnlyPenalisesExcess)
{
    Tensor s(Shape{4});
    s[0] = 0.1, s[1] = 0.5, s[2] = 0.7, s[3] = 0.2;
    Tape t;
    EXPECT_NEAR(loss_std_hinge(t.constant(s), 0.4).value().item(), (0.01 + 0.09) / 4.0, 1e-15);
}

TEST(DepthError, ForegroundMean)
{
    const double inf = std::numeric_limits<double>::infinity();
    const Map gt = depth_map(3, 1, {1.0, inf, 2.0});
    const Map pred = depth_map(3, 1, {1.5, 7.0, 1.9});
    EXPECT_NEAR(mean_foreground_depth_error(pred, gt), 0.3, 1e-15);
}

TEST(BatchIndex, EachEpochIsAPermutation)
{
    for (std::size_t n : {1u, 5u, 7u}) {
        for (std::size_t B : {1u, 3u}) {
            std::vector<std::size_t> seen;
            for (std::size_t it = 0; seen.size() < 3 * n; ++it)
                for (std::size_t j = 0; j < B; ++j) seen.push_back(batch_index(9, n, B, it, j));
            for (std::size_t e = 0; e < 3; ++e) {
                std::set<std::size_t> s(seen.begin() + e * n, seen.begin() + (e + 1) * n);
                EXPECT_EQ(s.size(), n);
                EXPECT_EQ(*s.rbegin(), n - 1);
            }
        }
    }
    EXPECT_THROW(batch_index(0, 0, 1, 0, 0), InvalidArgument);
}

TEST(BatchIndex, SeedChangesOrder)
{
    std::vector<std::size_t> a, b;
    for (std::size_t i = 0; i < 32; ++i) {
        a.push_back(batch_index(1, 32, 1, i, 0));
        b.push_back(batch_index(2, 32, 1, i, 0));
    }
    EXPECT_NE(a, b);
    for (std::size_t i = 0; i < 32; ++i) EXPECT_EQ(a[i], batch_index(1, 32, 1, i, 0));
}

TEST(TrainConfig, JsonRoundTripAndValidation)
{
    TrainConfig c = small_config("train_cfg");
    c.lambda_depth = 0.0;
    c.resume = "run/ckpt.rfck";
    const TrainConfig back = TrainConfig::from_json(c.to_json());
    EXPECT_EQ(back.to_json(), c.to_json());

    auto j = c.to_json();
    j["dataset"] = "rel/ds";
    EXPECT_EQ(TrainConfig::from_json(j, "/base").dataset, fs::path("/base/rel/ds"));
    j["batch_size"] = 0;
    EXPECT_THROW(TrainConfig::from_json(j), InvalidArgument);
    j = c.to_json();
    j["lambda_opacity"] = -1.0;
    EXPECT_THROW(TrainConfig::from_json(j), InvalidArgument);
    j = c.to_json();
    j.erase("out_dir");
    EXPECT_THROW(TrainConfig::from_json(j), InvalidArgument);
    j = c.to_json();
    j["version"] = 2;
    EXPECT_THROW(TrainConfig::from_json(j), InvalidArgument);
}

TEST(Train, LossFiniteAtInit)
{
    const TrainingSet ts = load_training_set(small_dataset());
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        gen::GeneratorConfig gc = small_generator();
        gc.init_seed = seed;
        const gen::Generator g(gc);
        for (const auto& s : ts.samples) {
            Tape t;
            const auto out = g.render(t, gen::constant_latents(t, s.latents));
            const Tensor mask = foreground_mask(s.depth);
            EXPECT_TRUE(std::isfinite(loss_photometric(out.image, gen::chw_from_image(s.image), mask).value().item()));
            EXPECT_TRUE(std::isfinite(loss_depth(out.d_mu, s.depth, mask).value().item()));
            EXPECT_TRUE(std::isfinite(loss_opacity(out.alpha, mask).value().item()));
        }
    }
}

TEST(Train, MetricsFileLayout)
{
    const TrainConfig c = small_config("train_layout");
    const TrainResult r = run(c);
    const auto lines = lines_of(c.out_dir / "metrics.jsonl");
    ASSERT_EQ(lines.size(), c.iterations);
    ASSERT_EQ(r.metrics.size(), c.iterations);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto j = nlohmann::json::parse(lines[i]);
        EXPECT_EQ(j.size(), 6u);
        EXPECT_EQ(j.at("iter"), i);
        for (const char* k : {"l_pht", "l_depth", "l_op"}) EXPECT_TRUE(std::isfinite(j.at(k).get<double>()));
        EXPECT_EQ(j.at("secs"), 0.0);
        EXPECT_EQ(j.at("psnr_val").is_null(), (i + 1) % 3 != 0) << i;
        EXPECT_EQ(lines[i], metrics_line(r.metrics[i]));
    }
    EXPECT_TRUE(fs::exists(c.out_dir / "final.rfck"));
    EXPECT_EQ(r.final_checkpoint, c.out_dir / "final.rfck");
}

TEST(Train, ValidationPsnrMatchesDirectEvaluation)
{
    TrainConfig c = small_config("train_val");
    c.val_count = 2;
    const TrainResult r = run(c);
    const TrainingSet ts = load_training_set(c.dataset);
    double acc = 0.0;
    for (std::size_t i = 0; i < 2; ++i) acc += vr::psnr(r.generator.forward(ts.samples[i].latents).image, ts.samples[i].image);
    EXPECT_DOUBLE_EQ(*r.metrics.back().psnr_val, acc / 2.0);
}

TEST(Train, DeterministicAcrossRunsAndWorkers)
{
    TrainConfig a = small_config("train_det_a");
    TrainConfig b = small_config("train_det_b");
    TrainConfig w = small_config("train_det_w");
    w.workers = 2;
    run(a);
    run(b);
    run(w);
    const std::string ref = testutil::slurp(a.out_dir / "metrics.jsonl");
    EXPECT_EQ(ref, testutil::slurp(b.out_dir / "metrics.jsonl"));
    EXPECT_EQ(ref, testutil::slurp(w.out_dir / "metrics.jsonl"));
    EXPECT_TRUE(state_bytes(a.out_dir / "final.rfck") == state_bytes(w.out_dir / "final.rfck"));
}

TEST(Train, SeedChangesBatchOrder)
{
    TrainConfig a = small_config("train_seed_a");
    TrainConfig b = small_config("train_seed_b");
    b.seed = 5;
    EXPECT_NE(run(a).metrics.front().l_pht, run(b).metrics.front().l_pht);
}

TEST(Train, CheckpointRoundTripRendersIdentically)
{
    const TrainConfig c = small_config("train_ck");
    const TrainResult r = run(c);
    const gen::Generator loaded = gen::Generator::from_checkpoint(tg::read_checkpoint(r.final_checkpoint));
    const TrainingSet ts = load_training_set(c.dataset);
    for (const auto& s : ts.samples) {
        const auto x = r.generator.forward(s.latents);
        const auto y = loaded.forward(s.latents);
        EXPECT_EQ(x.image.rgb, y.image.rgb);
        EXPECT_EQ(x.d_mu.values, y.d_mu.values);
    }
}

TEST(Train, ResumeReproducesUninterruptedRun)
{
    TrainConfig full = small_config("train_resume_full");
    full.checkpoint_every = 3;
    const TrainResult whole = run(full);
    ASSERT_TRUE(fs::exists(full.out_dir / "ckpt_000003.rfck"));
    EXPECT_FALSE(fs::exists(full.out_dir / "ckpt_000006.rfck"));

    TrainConfig rest = small_config("train_resume_rest");
    rest.resume = full.out_dir / "ckpt_000003.rfck";
    const TrainResult tail = run(rest);
    ASSERT_EQ(tail.metrics.size(), 3u);
    const auto ref = lines_of(full.out_dir / "metrics.jsonl");
    const auto got = lines_of(rest.out_dir / "metrics.jsonl");
    ASSERT_EQ(got.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(got[i], ref[i + 3]);
    EXPECT_TRUE(state_bytes(full.out_dir / "final.rfck") == state_bytes(rest.out_dir / "final.rfck"));
}

TEST(Train, ResumeWithDifferentGeneratorThrows)
{
    TrainConfig first = small_config("train_resume_bad_a");
    first.iterations = 1;
    run(first);
    TrainConfig c = small_config("train_resume_bad_b");
    c.generator.K = 5;
    c.resume = first.out_dir / "final.rfck";
    EXPECT_THROW(run(c), InvalidArgument);
}

TEST(Train, DimensionMismatchThrows)
{
    TrainConfig c = small_config("train_dims");
    c.generator.width = c.generator.height = 32;
    c.generator.blocks = 3;
    EXPECT_THROW(run(c), InvalidArgument);
    c = small_config("train_dims");
    c.generator.id_dim = kIdDim + 1;
    EXPECT_THROW(run(c), InvalidArgument);
}

TEST(Train, MissingDatasetThrows)
{
    TrainConfig c = small_config("train_missing");
    c.dataset = c.out_dir / "nowhere";
    EXPECT_ANY_THROW(run(c));
}

TEST(Train, NonFiniteLossDumpsBatch)
{
    TrainConfig c = small_config("train_nan");
    c.lr = 1e300;
    c.iterations = 20;
    try {
        run(c);
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("diagnostic.json"), std::string::npos);
    }
    const auto diag = nlohmann::json::parse(testutil::slurp(c.out_dir / "diagnostic.json"));
    EXPECT_EQ(diag.at("batch").size(), c.batch_size);
    EXPECT_TRUE(diag.at("batch")[0].contains("latents"));
}

TEST(Train, OverfitsSingleSample)
{
    const fs::path ds = testutil::scratch_dir("train_ds1");
    synth::generate_dataset(1, 64, 64, 7, ds);
    TrainConfig c;
    c.dataset = ds;
    c.out_dir = testutil::scratch_dir("train_overfit");
    c.iterations = 500;
    c.val_every = 0;
    c.wall_time = false;
    const TrainResult r = run(c);
    const TrainingSet ts = load_training_set(ds);
    const double final_mse = vr::mse(r.generator.forward(ts.samples[0].latents).image, ts.samples[0].image);
    EXPECT_LE(final_mse, 0.1 * r.metrics.front().l_pht);

    std::vector<double> head, tail;
    for (std::size_t i = 0; i < 100; ++i) head.push_back(r.metrics[i].l_pht);
    for (std::size_t i = 400; i < 500; ++i) tail.push_back(r.metrics[i].l_pht);
    EXPECT_GT(median(head), median(tail));
}

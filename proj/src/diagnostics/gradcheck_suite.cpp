#include "rf/diagnostics/gradcheck_suite.hpp"

#include "rf/core/error.hpp"
#include "rf/core/rng.hpp"
#include "rf/geometry/encoding.hpp"
#include "rf/synthscene/dataset.hpp"
#include "rf/synthscene/shading.hpp"
#include "rf/tensorgrad/gradcheck.hpp"
#include "rf/tensorgrad/ops.hpp"
#include "rf/volrender/tape_ops.hpp"

#include <chrono>
#include <functional>

namespace rf::diag {

using tg::Parameter;
using tg::Shape;
using tg::Tape;
using tg::Tensor;
using tg::Var;

gen::GeneratorConfig SuiteConfig::default_generator()
{
    gen::GeneratorConfig c;
    c.width = c.height = 16;
    c.blocks = 2;
    c.K = 4;
    c.base_channels = 6;
    c.min_channels = 4;
    c.id_dim = 8;
    c.mapping_depth = 2;
    c.mapping_width = 8;
    c.cond_channels = 4;
    c.pe_levels = 2;
    c.init_seed = 5;
    return c;
}

void SuiteConfig::validate() const
{
    if (!(op_tolerance > 0.0) || !(end_to_end_tolerance > 0.0)) throw InvalidArgument("gradcheck: tolerances must be > 0");
    if (trials == 0) throw InvalidArgument("gradcheck: trials must be >= 1");
    generator.validate();
}

nlohmann::json SuiteConfig::to_json() const
{
    return {{"version", 1},
            {"op_tolerance", op_tolerance},
            {"end_to_end_tolerance", end_to_end_tolerance},
            {"trials", trials},
            {"end_to_end_coords", end_to_end_coords},
            {"seed", seed},
            {"generator", generator.to_json()}};
}

SuiteConfig SuiteConfig::from_json(const nlohmann::json& j)
{
    SuiteConfig c;
    try {
        if (j.value("version", 1) != 1) throw InvalidArgument("gradcheck config: unsupported version");
        c.op_tolerance = j.value("op_tolerance", c.op_tolerance);
        c.end_to_end_tolerance = j.value("end_to_end_tolerance", c.end_to_end_tolerance);
        c.trials = j.value("trials", c.trials);
        c.end_to_end_coords = j.value("end_to_end_coords", c.end_to_end_coords);
        c.seed = j.value("seed", c.seed);
        if (j.contains("generator")) c.generator = gen::GeneratorConfig::from_json(j["generator"]);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("gradcheck config: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::json CheckResult::to_json() const
{
    return {{"name", name},         {"group", group},       {"max_rel_error", max_rel_error},
            {"tolerance", tolerance}, {"coords", coords},   {"worst_param", worst_param},
            {"passed", passed()},   {"secs", secs}};
}

namespace {

Tensor random_tensor(Shape s, Rng& rng, double lo, double hi)
{
    Tensor t(std::move(s));
    for (double& v : t.storage()) v = rng.uniform(lo, hi);
    return t;
}

// Random projection to a scalar, so every output entry gets a distinct upstream gradient.
Var project(Var y, Rng& rng)
{
    Tensor w(y.shape());
    for (double& v : w.storage()) v = rng.normal();
    return tg::sum(tg::mul(y, y.tape->constant(std::move(w))));
}

struct OpCase {
    std::string name;
    std::string group;
    // Draws inputs from rng into params and returns the loss builder.
    std::function<tg::LossBuilder(std::vector<Parameter>&, Rng&)> setup;
};

template <typename Build>
OpCase simple(std::string name, std::string group, std::vector<Shape> shapes, double lo, double hi, Build build)
{
    return {std::move(name), std::move(group), [shapes, lo, hi, build](std::vector<Parameter>& ps, Rng& rng) {
                for (std::size_t i = 0; i < shapes.size(); ++i)
                    ps.push_back({"in" + std::to_string(i), random_tensor(shapes[i], rng, lo, hi)});
                const std::uint64_t proj = rng.next_u64();
                return tg::LossBuilder([&ps, build, proj](Tape& t) {
                    std::vector<Var> in;
                    for (auto& p : ps) in.push_back(t.param(p));
                    Rng r(proj);
                    return project(build(in), r);
                });
            }};
}

std::vector<OpCase> op_cases()
{
    using V = std::vector<Var>;
    std::vector<OpCase> cases;
    cases.push_back({"composite", "composite", [](std::vector<Parameter>& ps, Rng& rng) {
                         const std::size_t K = 5, P = 4;
                         Tensor t0(Shape{K, P});
                         for (std::size_t p = 0; p < P; ++p) {
                             double acc = 1.4 + 0.1 * rng.uniform();
                             for (std::size_t k = 0; k < K; ++k) {
                                 t0[k * P + p] = acc;
                                 acc += rng.uniform(0.05, 0.4);
                             }
                         }
                         ps.push_back({"rgb", random_tensor({K, 3, P}, rng, 0.0, 1.0)});
                         ps.push_back({"sigma", random_tensor({K, P}, rng, 0.0, 4.0)});
                         ps.push_back({"t", t0});
                         const double t_far = rng.uniform() < 0.5 ? 3.0 : 4.6;
                         const std::uint64_t proj = rng.next_u64();
                         return tg::LossBuilder([&ps, t_far, proj](Tape& t) {
                             Rng r(proj);
                             return project(vr::composite_rays(t.param(ps[0]), t.param(ps[1]), t.param(ps[2]), t_far), r);
                         });
                     }});
    cases.push_back({"shade_blinn_phong", "shading", [](std::vector<Parameter>& ps, Rng& rng) {
                         const geom::Vec3 n = geom::normalize({rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 1.0});
                         const geom::Vec3 v = geom::normalize({rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 1.0});
                         ps.push_back({"normal", Tensor::vector({n.x, n.y, n.z})});
                         ps.push_back({"view", Tensor::vector({v.x, v.y, v.z})});
                         // Dim light keeps the output clear of the clamp at 1.
                         ps.push_back({"z_ill", Tensor::vector({rng.uniform(-0.4, 0.4), rng.uniform(-0.3, 0.3), 0.3, 0.35,
                                                                0.4, 0.1, 0.12, 0.1})});
                         ps.push_back({"albedo", Tensor::vector({0.5, 0.4, 0.3})});
                         const std::uint64_t proj = rng.next_u64();
                         return tg::LossBuilder([&ps, proj](Tape& t) {
                             Rng r(proj);
                             return project(synth::shade_blinn_phong(t.param(ps[0]), t.param(ps[1]), t.param(ps[2]),
                                                                     t.param(ps[3]), 0.2, 12.0),
                                            r);
                         });
                     }});
    cases.push_back(simple("positional_encode", "encoder", {{6}}, -1.0, 1.0,
                           [](V& v) { return geom::positional_encode(v[0], 4); }));
    cases.push_back(simple("light_direction", "encoder", {{8}}, -1.0, 1.0, [](V& v) { return gen::light_direction(v[0]); }));
    cases.push_back(simple("depth_guided_depths", "composite", {{4}, {4}}, 0.02, 0.3, [](V& v) {
        return vr::depth_guided_depths(tg::add_scalar(tg::scale(v[0], 4.0), 2.0), v[1], 8, 1.3, 4.7);
    }));
    cases.push_back(simple("linear", "network", {{3}, {4, 3}, {4}}, -1.0, 1.0, [](V& v) { return tg::linear(v[0], v[1], v[2]); }));
    cases.push_back(simple("rms_normalize", "network", {{6}}, -1.0, 1.0, [](V& v) { return tg::rms_normalize(v[0]); }));
    cases.push_back(simple("conv2d", "network", {{3, 5, 4}, {2, 3, 3, 3}}, -1.0, 1.0, [](V& v) { return tg::conv2d(v[0], v[1], 1); }));
    cases.push_back(simple("modulate_weights", "network", {{3, 2, 3, 3}, {2}}, 0.2, 1.5,
                           [](V& v) { return tg::modulate_weights(v[0], v[1], true); }));
    cases.push_back(simple("upsample2x", "network", {{2, 3, 2}}, -1.0, 1.0, [](V& v) { return tg::upsample2x(v[0]); }));
    cases.push_back(simple("instance_norm", "network", {{2, 3, 3}}, -1.0, 1.0, [](V& v) { return tg::instance_norm(v[0]); }));
    cases.push_back(simple("broadcast_spatial", "network", {{3}}, -1.0, 1.0, [](V& v) { return tg::broadcast_spatial(v[0], 2, 3); }));
    cases.push_back(simple("mul_channels", "network", {{2, 3, 3}, {2}}, -1.0, 1.0, [](V& v) { return tg::mul_channels(v[0], v[1]); }));
    cases.push_back(simple("add_channels", "network", {{2, 3, 3}, {2}}, -1.0, 1.0, [](V& v) { return tg::add_channels(v[0], v[1]); }));
    cases.push_back(simple("leaky_relu", "network", {{6}}, -1.0, 1.0, [](V& v) { return tg::leaky_relu(v[0]); }));
    cases.push_back(simple("sigmoid", "network", {{6}}, -4.0, 4.0, [](V& v) { return tg::sigmoid(v[0]); }));
    cases.push_back(simple("softplus", "network", {{6}}, -4.0, 4.0, [](V& v) { return tg::softplus(v[0]); }));
    cases.push_back(simple("concat", "network", {{2, 3}, {1, 3}}, -1.0, 1.0, [](V& v) { return tg::concat({v[0], v[1]}); }));
    return cases;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

std::vector<CheckResult> run_gradcheck_suite(const SuiteConfig& cfg)
{
    cfg.validate();
    std::vector<CheckResult> out;
    std::uint64_t stream = 0;
    for (const OpCase& c : op_cases()) {
        const auto t0 = std::chrono::steady_clock::now();
        CheckResult r{c.name, c.group, 0.0, cfg.op_tolerance, 0, {}, 0.0};
        for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
            Rng rng(stream_seed(cfg.seed, stream++));
            std::vector<Parameter> params;
            params.reserve(8);
            const tg::LossBuilder f = c.setup(params, rng);
            std::vector<Parameter*> ptrs;
            for (auto& p : params) ptrs.push_back(&p);
            const tg::GradCheckReport rep = tg::grad_check(f, ptrs, tg::GradCheckOptions{1e-5, 0, rng.next_u64()});
            r.coords += rep.coords_checked;
            if (rep.max_rel_error >= r.max_rel_error) {
                r.max_rel_error = rep.max_rel_error;
                r.worst_param = rep.worst_param;
            }
        }
        r.secs = seconds_since(t0);
        out.push_back(std::move(r));
    }

    const auto t0 = std::chrono::steady_clock::now();
    gen::Generator g(cfg.generator);
    Rng rng(stream_seed(cfg.seed, stream++));
    const synth::SceneLatents z = synth::sample_latents(cfg.seed + 1, 0, cfg.generator.id_dim);
    Parameter zi{"z_id", Tensor(Shape{z.z_id.size()}, z.z_id)}, ze{"z_exp", Tensor(Shape{z.z_exp.size()}, z.z_exp)},
        zc{"z_cam", Tensor(Shape{z.z_cam.size()}, z.z_cam)}, zl{"z_ill", Tensor(Shape{z.z_ill.size()}, z.z_ill)};
    const Tensor target = random_tensor({3, cfg.generator.height, cfg.generator.width}, rng, 0.0, 1.0);
    const auto f = [&](Tape& t) {
        const gen::LatentVars lv{t.param(zi), t.param(ze), t.param(zc), t.param(zl)};
        return tg::mse(g.render(t, lv).image, t.constant(target));
    };
    std::vector<Parameter*> params{&zi, &ze, &zc, &zl};
    for (Parameter* p : g.parameters()) params.push_back(p);
    const tg::GradCheckReport rep = tg::grad_check(f, params, tg::GradCheckOptions{1e-5, cfg.end_to_end_coords, rng.next_u64()});
    out.push_back({"end_to_end", "end_to_end", rep.max_rel_error, cfg.end_to_end_tolerance, rep.coords_checked,
                   rep.worst_param, seconds_since(t0)});
    return out;
}

} // namespace rf::diag

#include "rf/bench/bench.hpp"

#include "rf/core/error.hpp"
#include "rf/generator/generator.hpp"
#include "rf/synthscene/dataset.hpp"
#include "rf/tensorgrad/checkpoint.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace rf::bench {

namespace {

std::string kind_name(vr::SamplerKind k)
{
    switch (k) {
    case vr::SamplerKind::Uniform: return "uniform";
    case vr::SamplerKind::Hierarchical: return "hierarchical";
    case vr::SamplerKind::DepthGuided: return "depth";
    }
    return {};
}

bool is_kind(const std::string& k)
{
    return k == "uniform" || k == "hierarchical" || k == "depth" || k == "generator";
}

template <typename Fn>
double timed(Fn&& fn)
{
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

nlohmann::json BenchRow::to_json() const
{
    return {{"sampler", sampler}, {"kind", kind},   {"samples", samples},     {"fine", fine},
            {"evaluations", evaluations}, {"secs", secs}, {"psnr", psnr}, {"reference", reference}};
}

BenchRow BenchRow::from_json(const nlohmann::json& j)
{
    if (!j.is_object()) throw FormatError("bench row: not an object");
    BenchRow r;
    try {
        r.sampler = j.at("sampler").get<std::string>();
        r.kind = j.at("kind").get<std::string>();
        r.samples = j.at("samples").get<std::size_t>();
        r.fine = j.at("fine").get<std::size_t>();
        if (!j.at("evaluations").is_number_unsigned()) throw FormatError("bench row: evaluations must be a count");
        r.evaluations = j.at("evaluations").get<std::uint64_t>();
        if (!j.at("secs").is_number() || !j.at("psnr").is_number()) throw FormatError("bench row: secs and psnr must be numbers");
        r.secs = j.at("secs").get<double>();
        r.psnr = j.at("psnr").get<double>();
        r.reference = j.at("reference").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bench row: ") + e.what());
    }
    if (!is_kind(r.kind)) throw FormatError("bench row: unknown kind '" + r.kind + "'");
    if (!std::isfinite(r.secs) || r.secs < 0.0 || !std::isfinite(r.psnr))
        throw FormatError("bench row '" + r.sampler + "': secs and psnr must be finite, secs >= 0");
    return r;
}

const BenchRow* BenchReport::find(const std::string& sampler) const
{
    for (const auto& r : rows)
        if (r.sampler == sampler) return &r;
    return nullptr;
}

nlohmann::json BenchReport::to_json() const
{
    nlohmann::json rs = nlohmann::json::array();
    for (const auto& r : rows) rs.push_back(r.to_json());
    return {{"version", 1}, {"scene", scene}, {"width", width}, {"height", height}, {"rows", std::move(rs)}};
}

BenchReport BenchReport::from_json(const nlohmann::json& j)
{
    if (!j.is_object()) throw FormatError("bench report: not an object");
    BenchReport b;
    try {
        if (j.at("version").get<int>() != 1) throw FormatError("bench report: unsupported version");
        b.scene = j.at("scene").get<std::uint64_t>();
        b.width = j.at("width").get<std::size_t>();
        b.height = j.at("height").get<std::size_t>();
        if (!j.at("rows").is_array()) throw FormatError("bench report: rows must be an array");
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bench report: ") + e.what());
    }
    for (const auto& r : j["rows"]) b.rows.push_back(BenchRow::from_json(r));
    for (std::size_t i = 1; i < b.rows.size(); ++i)
        if (b.rows[i].evaluations < b.rows[i - 1].evaluations)
            throw FormatError("bench report: rows not sorted by evaluations");
    return b;
}

synth::SceneLatents bench_latents(std::uint64_t scene, std::size_t id_dim)
{
    if (scene != 0) return synth::sample_latents(scene, 0, id_dim);
    synth::SceneLatents z;
    z.z_id.assign(id_dim, 0.0);
    z.z_ill = synth::mean_illumination();
    return z;
}

vr::Field oracle_as_field(const synth::FaceProxyScene& scene, const synth::SceneLatents& z, const synth::OracleConfig& cfg)
{
    return [scene, z, cfg](const geom::Vec3& p, const geom::Vec3& v) {
        const synth::FieldSample s = synth::oracle_field(scene, z, p, v, cfg);
        return vr::FieldValue{s.rgb, s.sigma};
    };
}

vr::DepthGuide traced_depth_guide(const synth::FaceProxyScene& scene, const synth::SceneLatents& z,
                                  const synth::OracleConfig& cfg)
{
    return [scene, z, cfg](std::size_t, std::size_t, const geom::Ray& ray) {
        const double t = synth::trace_depth(scene, z.z_exp, ray);
        if (std::isfinite(t)) return vr::DepthGuess{t, 2.0 * cfg.eps_surf};
        return vr::DepthGuess{0.5 * (ray.t_near + ray.t_far), 0.25 * (ray.t_far - ray.t_near)};
    };
}

BenchReport run_bench(const BenchOptions& opts)
{
    if (opts.resolution == 0) throw InvalidArgument("bench: resolution must be positive");
    std::vector<vr::SamplerSpec> specs{vr::parse_sampler(kReferenceSampler)};
    for (const auto& name : opts.samplers) {
        vr::SamplerSpec s = vr::parse_sampler(name);
        const bool dup = std::any_of(specs.begin(), specs.end(), [&](const auto& o) { return o.name() == s.name(); });
        if (!dup) specs.push_back(std::move(s));
    }

    const synth::SceneLatents z = bench_latents(opts.scene, opts.id_dim);
    const synth::FaceProxyScene scene = synth::identity_to_proxy(z.z_id);
    const geom::CameraPose cam = geom::camera_from_z_cam(z.z_cam);
    const vr::Field field = oracle_as_field(scene, z, opts.oracle);
    const std::size_t W = opts.resolution, H = opts.resolution;
    const vr::FieldRenderOptions ro{0.5, opts.render_seed, opts.workers};

    BenchReport report;
    report.scene = opts.scene;
    report.width = W;
    report.height = H;
    Image reference;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        vr::SamplerSpec& s = specs[i];
        if (s.kind == vr::SamplerKind::DepthGuided) s.guide = traced_depth_guide(scene, z, opts.oracle);
        vr::FieldRender r;
        const double secs = timed([&] { r = vr::render_field(field, cam, s, W, H, ro); });
        if (i == 0) reference = r.image;
        report.rows.push_back({s.name(), kind_name(s.kind), s.samples, s.fine, r.evaluations,
                               opts.wall_time ? secs : 0.0, vr::psnr(r.image, reference), i == 0});
    }

    if (opts.generator) {
        const gen::Generator g = gen::Generator::from_checkpoint(tg::read_checkpoint(*opts.generator));
        if (g.config().width != W || g.config().height != H)
            throw InvalidArgument("bench: generator renders " + std::to_string(g.config().width) + "x" +
                                  std::to_string(g.config().height) + ", bench resolution is " + std::to_string(W));
        const synth::SceneLatents zg = bench_latents(opts.scene, g.config().id_dim);
        gen::Rendered out;
        const double secs = timed([&] { out = g.forward(zg); });
        const std::size_t K = g.config().K;
        report.rows.push_back({"generator:" + std::to_string(K), "generator", K, 0, static_cast<std::uint64_t>(W * H * K),
                               opts.wall_time ? secs : 0.0, vr::psnr(out.image, reference), false});
    }

    std::stable_sort(report.rows.begin(), report.rows.end(), [](const BenchRow& a, const BenchRow& b) {
        return a.evaluations != b.evaluations ? a.evaluations < b.evaluations : a.sampler < b.sampler;
    });
    return report;
}

} // namespace rf::bench

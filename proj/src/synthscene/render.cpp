#include "rf/synthscene/render.hpp"

#include "rf/core/error.hpp"
#include "rf/core/parallel.hpp"

#include <spdlog/spdlog.h>

#include <cmath>

namespace rf::synth {

namespace {

double refine_crossing(const FaceProxyScene& scene, std::span<const double> z_exp, const geom::Ray& ray, double lo,
                       double hi, double tol)
{
    // sdf(lo) > 0 > sdf(hi)
    double mid = 0.5 * (lo + hi);
    for (int i = 0; i < 200; ++i) {
        mid = 0.5 * (lo + hi);
        const double d = sdf(scene, z_exp, ray.at(mid));
        if (std::abs(d) < tol || hi - lo < 1e-13) break;
        (d > 0 ? lo : hi) = mid;
    }
    return mid;
}

} // namespace

double trace_depth(const FaceProxyScene& scene, std::span<const double> z_exp, const geom::Ray& ray,
                   const TraceOptions& opts)
{
    double t = ray.t_near;
    double d = sdf(scene, z_exp, ray.at(t));
    if (d < 0.0) return t;
    for (int it = 0; it < opts.max_iterations; ++it) {
        if (d < opts.tolerance) return t;
        if (t >= ray.t_far) return kBackgroundDepth;
        const double t_next = std::min(ray.t_far, t + std::max(opts.safety * d, opts.min_step));
        const double d_next = sdf(scene, z_exp, ray.at(t_next));
        if (d_next < 0.0) return refine_crossing(scene, z_exp, ray, t, t_next, opts.tolerance);
        t = t_next;
        d = d_next;
    }
    spdlog::warn("trace_depth: no convergence after {} iterations, treating ray as background", opts.max_iterations);
    return kBackgroundDepth;
}

Vec3 shade_surface(const FaceProxyScene& scene, std::span<const double> z_exp, std::span<const double> z_ill,
                   const Vec3& p, const Vec3& view_dir)
{
    const Vec3 n = sdf_normal(scene, z_exp, p);
    return shade_blinn_phong(n, view_dir, z_ill, Material{albedo_at(scene, p), scene.k_s, scene.shininess});
}

LabeledSample render_ground_truth(const FaceProxyScene& scene, const SceneLatents& latents, std::size_t width,
                                  std::size_t height, const RenderOptions& opts)
{
    const geom::CameraPose cam = opts.pose ? *opts.pose : geom::camera_from_z_cam(latents.z_cam, opts.camera);
    const geom::RayGrid rays = geom::generate_rays(cam, width, height);
    LabeledSample out{Image(width, height, opts.background), Map(width, height, kBackgroundDepth), latents};
    parallel_for(height, opts.workers, [&](std::size_t y) {
        for (std::size_t x = 0; x < width; ++x) {
            const geom::Ray& ray = rays.at(x, y);
            const double t = trace_depth(scene, latents.z_exp, ray);
            if (!std::isfinite(t)) continue;
            out.depth.at(x, y) = t;
            const Vec3 c = shade_surface(scene, latents.z_exp, latents.z_ill, ray.at(t), -ray.direction);
            out.image.at(x, y, 0) = c.x;
            out.image.at(x, y, 1) = c.y;
            out.image.at(x, y, 2) = c.z;
        }
    });
    return out;
}

FieldSample oracle_field(const FaceProxyScene& scene, const SceneLatents& latents, const Vec3& point,
                         const Vec3& view_dir, const OracleConfig& cfg)
{
    if (!geom::finite(point)) throw InvalidArgument("oracle_field: point must be finite");
    const double d = sdf(scene, latents.z_exp, point);
    const double x = -d / cfg.eps_surf;
    const double logistic = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    // Two Newton steps onto the zero level set.
    Vec3 q = point;
    double dq = d;
    for (int i = 0; i < 2; ++i) {
        q = q - sdf_normal(scene, latents.z_exp, q) * dq;
        dq = sdf(scene, latents.z_exp, q);
    }
    return FieldSample{shade_surface(scene, latents.z_exp, latents.z_ill, q, view_dir), cfg.sigma_max * logistic};
}

} // namespace rf::synth

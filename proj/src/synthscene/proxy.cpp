#include "rf/synthscene/proxy.hpp"

#include "rf/core/error.hpp"
#include "rf/core/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <vector>

namespace rf::synth {

namespace {

struct ParamRange {
    double mid, half;
};

// Projection order: head radii (3), nose radii (3), nose centre y/z (2), eye
// radii (2), eye centre |x|/y/z (3), albedo RGB (3), blotch (2), k_s, shininess,
// expression amplitudes (20).
const std::array<ParamRange, kProxyParams>& param_ranges()
{
    static const std::array<ParamRange, kProxyParams> ranges = [] {
        std::array<ParamRange, kProxyParams> r{};
        const ParamRange fixed[] = {
            {0.70, 0.06}, {0.85, 0.06}, {0.72, 0.05},  // head
            {0.09, 0.02}, {0.17, 0.03}, {0.13, 0.03},  // nose radii
            {-0.05, 0.04}, {0.62, 0.03},               // nose centre
            {0.12, 0.02}, {0.12, 0.02},                // eye radii
            {0.26, 0.03}, {0.18, 0.03}, {0.68, 0.03},  // eye centre
            {0.75, 0.15}, {0.55, 0.12}, {0.45, 0.12},  // albedo
            {0.5, 0.5}, {0.5, 0.5},                    // blotches
            {0.25, 0.15}, {24.0, 12.0},                // k_s, shininess
        };
        std::copy(std::begin(fixed), std::end(fixed), r.begin());
        for (std::size_t i = 20; i < kProxyParams; ++i) r[i] = {0.035, 0.01};
        return r;
    }();
    return ranges;
}

// Row-major kProxyParams x d projection, fixed seed, cached per dimension.
const std::vector<double>& projection(std::size_t d)
{
    static std::mutex mu;
    static std::map<std::size_t, std::vector<double>> cache;
    std::lock_guard lock(mu);
    auto it = cache.find(d);
    if (it == cache.end()) {
        Rng rng(0x5EEDFACEull + d);
        std::vector<double> p(kProxyParams * d);
        for (double& v : p) v = rng.normal();
        it = cache.emplace(d, std::move(p)).first;
    }
    return it->second;
}

FaceProxyScene from_parameters(const std::array<double, kProxyParams>& v)
{
    FaceProxyScene s;
    s.head_radii = {v[0], v[1], v[2]};
    s.nose_radii = {v[3], v[4], v[5]};
    s.nose_center = {0.0, v[6], v[7]};
    s.eye_radius = {v[8], v[9]};
    s.eye_center = {Vec3{-v[10], v[11], v[12]}, Vec3{v[10], v[11], v[12]}};
    s.albedo_base = {v[13], v[14], v[15]};
    s.blotch = {v[16], v[17]};
    s.k_s = v[18];
    s.shininess = v[19];
    for (std::size_t i = 0; i < kExpDim; ++i) s.expr_amplitude[i] = v[20 + i];
    return s;
}

// Quilez's ellipsoid bound; exact on the surface, approximate elsewhere.
double sd_ellipsoid(const Vec3& p, const Vec3& r)
{
    const Vec3 q{p.x / r.x, p.y / r.y, p.z / r.z};
    const Vec3 q2{p.x / (r.x * r.x), p.y / (r.y * r.y), p.z / (r.z * r.z)};
    const double k0 = geom::norm(q);
    const double k1 = geom::norm(q2);
    if (k1 < 1e-12) return -std::min({r.x, r.y, r.z});
    return k0 * (k0 - 1.0) / k1;
}

double smooth_min(double a, double b, double k)
{
    const double h = std::clamp(0.5 + 0.5 * (b - a) / k, 0.0, 1.0);
    return b + (a - b) * h - k * h * (1.0 - h);
}

double smooth_max(double a, double b, double k) { return -smooth_min(-a, -b, k); }

constexpr double kNoseBlend = 0.06;
constexpr double kEyeBlend = 0.04;

} // namespace

bool FaceProxyScene::satisfies_invariants() const
{
    auto positive = [](const Vec3& v) { return v.x > 0 && v.y > 0 && v.z > 0; };
    if (!positive(head_radii) || !positive(nose_radii) || eye_radius[0] <= 0 || eye_radius[1] <= 0) return false;
    if (std::max({head_radii.x, head_radii.y, head_radii.z}) >= 1.0) return false;
    const double nose_extent = geom::norm(nose_center) + std::max({nose_radii.x, nose_radii.y, nose_radii.z});
    if (nose_extent >= 1.0) return false;
    for (int e = 0; e < 2; ++e)
        if (geom::norm(eye_center[e]) + eye_radius[e] >= 1.0) return false;
    return k_s >= 0 && shininess > 0;
}

const ExpressionBasis& expression_basis()
{
    static const ExpressionBasis basis = [] {
        ExpressionBasis b{};
        const double yaws[] = {-0.9, -0.45, 0.0, 0.45, 0.9};
        const double pitches[] = {-0.6, -0.2, 0.2, 0.6};
        const Vec3 r{0.70, 0.85, 0.72};
        std::size_t i = 0;
        for (double pitch : pitches)
            for (double yaw : yaws)
                b.centers[i++] = {r.x * std::cos(pitch) * std::sin(yaw), r.y * std::sin(pitch),
                                  r.z * std::cos(pitch) * std::cos(yaw)};
        b.width = 0.14;
        return b;
    }();
    return basis;
}

FaceProxyScene identity_to_proxy(std::span<const double> z_id)
{
    const std::size_t d = z_id.size();
    for (double v : z_id)
        if (!std::isfinite(v)) throw InvalidArgument("identity_to_proxy: z_ID must be finite");
    const auto& ranges = param_ranges();
    std::array<double, kProxyParams> v{};
    if (d == 0) {
        for (std::size_t j = 0; j < kProxyParams; ++j) v[j] = ranges[j].mid;
        return from_parameters(v);
    }
    const auto& p = projection(d);
    const double norm = 0.5 / std::sqrt(static_cast<double>(d));
    for (std::size_t j = 0; j < kProxyParams; ++j) {
        double a = 0.0;
        for (std::size_t k = 0; k < d; ++k) a += p[j * d + k] * z_id[k];
        v[j] = ranges[j].mid + ranges[j].half * std::clamp(a * norm, -1.0, 1.0);
    }
    return from_parameters(v);
}

FaceProxyScene mean_face() { return identity_to_proxy({}); }

std::array<double, kProxyParams> proxy_parameters(const FaceProxyScene& s)
{
    std::array<double, kProxyParams> v{s.head_radii.x, s.head_radii.y, s.head_radii.z, s.nose_radii.x, s.nose_radii.y,
                                       s.nose_radii.z, s.nose_center.y, s.nose_center.z, s.eye_radius[0], s.eye_radius[1],
                                       s.eye_center[1].x, s.eye_center[1].y, s.eye_center[1].z, s.albedo_base.x,
                                       s.albedo_base.y, s.albedo_base.z, s.blotch[0], s.blotch[1], s.k_s, s.shininess};
    for (std::size_t i = 0; i < kExpDim; ++i) v[20 + i] = s.expr_amplitude[i];
    return v;
}

double sdf_base(const FaceProxyScene& s, const Vec3& p)
{
    double d = sd_ellipsoid(p, s.head_radii);
    d = smooth_min(d, sd_ellipsoid(p - s.nose_center, s.nose_radii), kNoseBlend);
    for (int e = 0; e < 2; ++e) {
        const double eye = geom::norm(p - s.eye_center[e]) - s.eye_radius[e];
        d = smooth_max(d, -eye, kEyeBlend);
    }
    return d;
}

double expression_displacement(const FaceProxyScene& s, std::span<const double> z_exp, const Vec3& p)
{
    const ExpressionBasis& b = expression_basis();
    const double inv = 1.0 / (2.0 * b.width * b.width);
    double total = 0.0;
    for (std::size_t i = 0; i < z_exp.size() && i < kExpDim; ++i) {
        if (z_exp[i] == 0.0) continue;
        const Vec3 q = p - b.centers[i];
        total += z_exp[i] * s.expr_amplitude[i] * std::exp(-geom::dot(q, q) * inv);
    }
    return total;
}

double sdf(const FaceProxyScene& s, std::span<const double> z_exp, const Vec3& p)
{
    return sdf_base(s, p) - expression_displacement(s, z_exp, p);
}

Vec3 sdf_normal(const FaceProxyScene& s, std::span<const double> z_exp, const Vec3& p, double h)
{
    const Vec3 dx{h, 0, 0}, dy{0, h, 0}, dz{0, 0, h};
    const Vec3 g{sdf(s, z_exp, p + dx) - sdf(s, z_exp, p - dx), sdf(s, z_exp, p + dy) - sdf(s, z_exp, p - dy),
                 sdf(s, z_exp, p + dz) - sdf(s, z_exp, p - dz)};
    const double n = geom::norm(g);
    return n > 0 ? g / n : Vec3{0, 0, 1};
}

Vec3 albedo_at(const FaceProxyScene& s, const Vec3& p)
{
    const double cx = std::abs(p.x) - 0.33, cy = p.y + 0.12, cz = p.z - 0.55;
    const double cheek = std::exp(-(cx * cx + cy * cy + cz * cz) / (2.0 * 0.12 * 0.12));
    const double by = p.y - 0.36;
    const double brow = std::exp(-(by * by) / (2.0 * 0.05 * 0.05)) * std::clamp(p.z / 0.3, 0.0, 1.0);
    Vec3 a = s.albedo_base + Vec3{0.12, -0.04, -0.04} * (s.blotch[0] * cheek) - Vec3{0.15, 0.15, 0.15} * (s.blotch[1] * brow);
    return {std::clamp(a.x, 0.0, 1.0), std::clamp(a.y, 0.0, 1.0), std::clamp(a.z, 0.0, 1.0)};
}

} // namespace rf::synth

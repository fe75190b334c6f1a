#include "rf/synthscene/shading.hpp"

#include "rf/core/error.hpp"

#include <algorithm>
#include <cmath>

namespace rf::synth {

Vec3 light_direction(double yaw, double pitch)
{
    return {std::cos(pitch) * std::sin(yaw), std::sin(pitch), std::cos(pitch) * std::cos(yaw)};
}

Vec3 shade_blinn_phong_unclamped(const Vec3& n, const Vec3& v, std::span<const double> z_ill, const Material& m)
{
    if (z_ill.size() != 8) throw InvalidArgument("shade_blinn_phong: z_ill must have 8 entries");
    const Vec3 l = light_direction(z_ill[0], z_ill[1]);
    const Vec3 light{z_ill[2], z_ill[3], z_ill[4]};
    const Vec3 ambient{z_ill[5], z_ill[6], z_ill[7]};
    Vec3 out = geom::hadamard(ambient, m.albedo);
    const double ndl = geom::dot(n, l);
    if (ndl > 0.0) {
        const Vec3 h = geom::normalize(l + v);
        const double spec = m.k_s * std::pow(std::max(0.0, geom::dot(n, h)), m.shininess);
        out += geom::hadamard(light, m.albedo * ndl + Vec3{spec, spec, spec});
    }
    return out;
}

Vec3 shade_blinn_phong(const Vec3& n, const Vec3& v, std::span<const double> z_ill, const Material& m)
{
    const Vec3 c = shade_blinn_phong_unclamped(n, v, z_ill, m);
    return {std::clamp(c.x, 0.0, 1.0), std::clamp(c.y, 0.0, 1.0), std::clamp(c.z, 0.0, 1.0)};
}

namespace {

Vec3 vec_of(const tg::Tensor& t, std::size_t offset = 0) { return {t[offset], t[offset + 1], t[offset + 2]}; }

} // namespace

tg::Var shade_blinn_phong(tg::Var normal, tg::Var view_dir, tg::Var z_ill, tg::Var albedo, double k_s, double shininess)
{
    if (normal.size() != 3 || view_dir.size() != 3 || z_ill.size() != 8 || albedo.size() != 3)
        throw InvalidArgument("shade_blinn_phong: expected normal[3], view[3], z_ill[8], albedo[3]");
    const Material m{vec_of(albedo.value()), k_s, shininess};
    const Vec3 c = shade_blinn_phong(vec_of(normal.value()), vec_of(view_dir.value()), z_ill.value().values(), m);
    tg::Tensor out = tg::Tensor::vector({c.x, c.y, c.z});

    return normal.tape->record(
        "shade_blinn_phong", std::move(out), {normal, view_dir, z_ill, albedo},
        [=](tg::Tape& t, const tg::Tensor&, const tg::Tensor& g) {
            const Vec3 n = vec_of(t.value(normal));
            const Vec3 v = vec_of(t.value(view_dir));
            const tg::Tensor& ill = t.value(z_ill);
            const Vec3 alb = vec_of(t.value(albedo));
            const Vec3 light = vec_of(ill, 2), ambient = vec_of(ill, 5);
            const double yaw = ill[0], pitch = ill[1];
            const Vec3 l = light_direction(yaw, pitch);
            const Vec3 unclamped = shade_blinn_phong_unclamped(n, v, ill.values(), Material{alb, k_s, shininess});
            // Upstream gradient gated by the output clamp.
            double gc[3];
            for (int c = 0; c < 3; ++c) {
                const double u = unclamped[c];
                gc[c] = (u > 0.0 && u < 1.0) ? g[c] : 0.0;
            }
            const double ndl = geom::dot(n, l);
            const bool lit = ndl > 0.0;
            Vec3 h{}, hu{};
            double ndh = 0.0, spec = 0.0, dspec = 0.0;
            if (lit) {
                hu = l + v;
                h = geom::normalize(hu);
                ndh = std::max(0.0, geom::dot(n, h));
                spec = k_s * std::pow(ndh, shininess);
                dspec = ndh > 0.0 ? k_s * shininess * std::pow(ndh, shininess - 1.0) : 0.0;
            }
            const double diff = lit ? ndl : 0.0;

            if (tg::Tensor* ga = t.grad_sink(albedo))
                for (int c = 0; c < 3; ++c) (*ga)[c] += gc[c] * (ambient[c] + light[c] * diff);
            double g_diff = 0.0, g_spec = 0.0;
            for (int c = 0; c < 3; ++c) {
                g_diff += gc[c] * light[c] * alb[c];
                g_spec += gc[c] * light[c];
            }
            const double g_ndh = g_spec * dspec;
            // d ndh / d h = n, projected through the normalisation of h_u = l + v.
            Vec3 g_hu{};
            if (lit) {
                const double hn = geom::norm(hu);
                g_hu = (n - h * geom::dot(h, n)) * (g_ndh / hn);
            }
            if (tg::Tensor* gi = t.grad_sink(z_ill)) {
                for (int c = 0; c < 3; ++c) {
                    (*gi)[2 + c] += gc[c] * (alb[c] * diff + spec);
                    (*gi)[5 + c] += gc[c] * alb[c];
                }
                if (lit) {
                    const Vec3 g_l = n * g_diff + g_hu;
                    const Vec3 dl_dyaw{std::cos(pitch) * std::cos(yaw), 0.0, -std::cos(pitch) * std::sin(yaw)};
                    const Vec3 dl_dpitch{-std::sin(pitch) * std::sin(yaw), std::cos(pitch), -std::sin(pitch) * std::cos(yaw)};
                    (*gi)[0] += geom::dot(g_l, dl_dyaw);
                    (*gi)[1] += geom::dot(g_l, dl_dpitch);
                }
            }
            if (lit) {
                if (tg::Tensor* gn = t.grad_sink(normal)) {
                    const Vec3 gnv = l * g_diff + h * g_ndh;
                    for (int c = 0; c < 3; ++c) (*gn)[c] += gnv[c];
                }
                if (tg::Tensor* gv = t.grad_sink(view_dir))
                    for (int c = 0; c < 3; ++c) (*gv)[c] += g_hu[c];
            }
        });
}

} // namespace rf::synth

#include "rf/volrender/tape_ops.hpp"

#include "rf/core/error.hpp"
#include "rf/volrender/composite.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rf::vr {

using tg::Shape;
using tg::Tape;
using tg::Tensor;
using tg::Var;

namespace {

struct RayBuffers {
    std::vector<double> t, sigma, dt, dsigma;
    std::vector<Vec3> color, dc;
    RaySamples view;

    explicit RayBuffers(std::size_t K) : t(K), sigma(K), dt(K), dsigma(K), color(K), dc(K) {}

    void load(const Tensor& rgb, const Tensor& sg, const Tensor& tt, std::size_t p, std::size_t P)
    {
        for (std::size_t k = 0; k < t.size(); ++k) {
            t[k] = tt[k * P + p];
            sigma[k] = sg[k * P + p];
            color[k] = {rgb[(k * 3 + 0) * P + p], rgb[(k * 3 + 1) * P + p], rgb[(k * 3 + 2) * P + p]};
        }
    }
};

} // namespace

Var composite_rays(Var rgb, Var sigma, Var t, double t_far)
{
    const Shape& ss = sigma.shape();
    if (ss.size() != 2 || t.shape() != ss) throw InvalidArgument("composite_rays: sigma and t must both be [K,P]");
    const std::size_t K = ss[0], P = ss[1];
    if (rgb.shape() != Shape{K, 3, P}) throw InvalidArgument("composite_rays: rgb must be [K,3,P]");
    if (rgb.tape != sigma.tape || rgb.tape != t.tape) throw InvalidArgument("composite_rays: operands on different tapes");

    Tensor out({4, P});
    RayBuffers b(K);
    for (std::size_t p = 0; p < P; ++p) {
        b.load(rgb.value(), sigma.value(), t.value(), p, P);
        RaySamples s{b.t, b.color, b.sigma};
        const CompositeResult r = composite(s, t_far);
        out[0 * P + p] = r.color.x;
        out[1 * P + p] = r.color.y;
        out[2 * P + p] = r.color.z;
        out[3 * P + p] = r.alpha;
    }
    return rgb.tape->record(
        "composite", std::move(out), {rgb, sigma, t}, [rgb, sigma, t, K, P, t_far](Tape& tp, const Tensor&, const Tensor& g) {
            Tensor* g_rgb = tp.grad_sink(rgb);
            Tensor* g_sigma = tp.grad_sink(sigma);
            Tensor* g_t = tp.grad_sink(t);
            RayBuffers b(K);
            for (std::size_t p = 0; p < P; ++p) {
                b.load(tp.value(rgb), tp.value(sigma), tp.value(t), p, P);
                const Vec3 dcol{g[0 * P + p], g[1 * P + p], g[2 * P + p]};
                composite_vjp(b.t, b.color, b.sigma, t_far, dcol, g[3 * P + p], b.dt, b.dc, b.dsigma);
                for (std::size_t k = 0; k < K; ++k) {
                    if (g_rgb) {
                        (*g_rgb)[(k * 3 + 0) * P + p] += b.dc[k].x;
                        (*g_rgb)[(k * 3 + 1) * P + p] += b.dc[k].y;
                        (*g_rgb)[(k * 3 + 2) * P + p] += b.dc[k].z;
                    }
                    if (g_sigma) (*g_sigma)[k * P + p] += b.dsigma[k];
                    if (g_t) (*g_t)[k * P + p] += b.dt[k];
                }
            }
        });
}

Var depth_guided_depths(Var d_mu, Var d_std, std::size_t K, double t_near, double t_far, const DepthSamplingConfig& cfg)
{
    if (d_mu.shape().size() != 1 || d_std.shape() != d_mu.shape())
        throw InvalidArgument("depth_guided_depths: d_mu and d_std must both be [P]");
    if (cfg.iid) throw InvalidArgument("depth_guided_depths: iid sampling is not differentiable");
    if (K == 0 || !(t_near < t_far)) throw InvalidArgument("depth_guided_depths: need K >= 1 and t_near < t_far");
    const std::size_t P = d_mu.shape()[0];
    const double floor = std_floor(t_near, t_far, cfg);
    const std::vector<double> q = gaussian_quantiles(K);

    Tensor out({K, P});
    for (std::size_t p = 0; p < P; ++p) {
        const double mu = d_mu.value()[p], sd = d_std.value()[p];
        if (!std::isfinite(mu) || !std::isfinite(sd) || sd < 0.0)
            throw InvalidArgument("depth_guided_depths: invalid D_mu/D_std");
        const double s = std::max(sd, floor);
        for (std::size_t k = 0; k < K; ++k) out[k * P + p] = std::clamp(mu + s * q[k], t_near, t_far);
    }
    return d_mu.tape->record(
        "depth_guided_depths", std::move(out), {d_mu, d_std},
        [d_mu, d_std, q, K, P, t_near, t_far, floor](Tape& tp, const Tensor& y, const Tensor& g) {
            Tensor* g_mu = tp.grad_sink(d_mu);
            Tensor* g_sd = tp.grad_sink(d_std);
            const Tensor& sd = tp.value(d_std);
            for (std::size_t p = 0; p < P; ++p) {
                const bool floored = sd[p] < floor;
                for (std::size_t k = 0; k < K; ++k) {
                    const double v = y[k * P + p];
                    if (v <= t_near || v >= t_far) continue;
                    const double gk = g[k * P + p];
                    if (g_mu) (*g_mu)[p] += gk;
                    if (g_sd && !floored) (*g_sd)[p] += gk * q[k];
                }
            }
        });
}

} // namespace rf::vr

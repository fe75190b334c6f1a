#include "rf/volrender/samplers.hpp"

#include "rf/core/error.hpp"
#include "rf/volrender/composite.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rf::vr {

double inverse_normal_cdf(double p)
{
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -HUGE_VAL;
        if (p == 1.0) return HUGE_VAL;
        throw InvalidArgument("inverse_normal_cdf: p outside [0, 1]");
    }
    // Acklam's rational approximation, then one Halley step on erfc.
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

std::vector<double> sample_uniform_stratified(double t_near, double t_far, std::size_t K, const UniformSource& u)
{
    if (K == 0) throw InvalidArgument("sample_uniform_stratified: K must be >= 1");
    if (!(t_near < t_far)) throw InvalidArgument("sample_uniform_stratified: need t_near < t_far");
    const double width = (t_far - t_near) / static_cast<double>(K);
    std::vector<double> t(K);
    for (std::size_t k = 0; k < K; ++k) t[k] = std::min(t_far, t_near + (static_cast<double>(k) + u()) * width);
    return t;
}

std::vector<double> sample_fine(std::span<const double> depths, std::span<const double> weights, std::size_t n_fine,
                                double t_far, const UniformSource& u)
{
    if (depths.size() != weights.size()) throw InvalidArgument("sample_hierarchical: depths/weights length differ");
    const std::vector<double> delta = interval_lengths(depths, t_far);
    const std::size_t K = depths.size();

    std::vector<double> cdf(K + 1, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
        if (!(weights[k] >= 0.0) || !std::isfinite(weights[k]))
            throw InvalidArgument("sample_hierarchical: weights must be finite and >= 0");
        cdf[k + 1] = cdf[k] + (delta[k] > 0.0 ? weights[k] : 0.0);
    }
    const double total = cdf[K];
    bool uniform = !(total > 0.0);
    if (uniform) {
        spdlog::debug("sample_hierarchical: all-zero weights, falling back to uniform");
        for (std::size_t k = 0; k < K; ++k) cdf[k + 1] = cdf[k] + delta[k];
        if (!(cdf[K] > 0.0)) return std::vector<double>(n_fine, depths[0]);
    }
    const double norm = cdf[K];

    std::vector<double> fine(n_fine);
    for (std::size_t i = 0; i < n_fine; ++i) {
        const double target = (static_cast<double>(i) + u()) / static_cast<double>(n_fine) * norm;
        std::size_t k = static_cast<std::size_t>(std::upper_bound(cdf.begin() + 1, cdf.end(), target) - cdf.begin()) - 1;
        k = std::min(k, K - 1);
        while (k + 1 < K && cdf[k + 1] - cdf[k] <= 0.0) ++k;
        const double mass = cdf[k + 1] - cdf[k];
        const double frac = mass > 0.0 ? std::clamp((target - cdf[k]) / mass, 0.0, 1.0) : 0.5;
        fine[i] = depths[k] + frac * delta[k];
    }
    std::sort(fine.begin(), fine.end());
    return fine;
}

std::vector<double> sample_hierarchical(std::span<const double> depths, std::span<const double> weights,
                                        std::size_t n_fine, double t_far, const UniformSource& u)
{
    std::vector<double> fine = sample_fine(depths, weights, n_fine, t_far, u);
    std::vector<double> merged(depths.size() + fine.size());
    std::merge(depths.begin(), depths.end(), fine.begin(), fine.end(), merged.begin());
    return merged;
}

double std_floor(double t_near, double t_far, const DepthSamplingConfig& cfg)
{
    return cfg.std_floor_fraction * (t_far - t_near);
}

std::vector<double> gaussian_quantiles(std::size_t K)
{
    std::vector<double> q(K);
    for (std::size_t k = 0; k < K; ++k)
        q[k] = inverse_normal_cdf((static_cast<double>(k) + 0.5) / static_cast<double>(K));
    // exact antisymmetry
    for (std::size_t k = 0; k < K / 2; ++k) {
        q[K - 1 - k] = -q[k];
    }
    if (K % 2 == 1) q[K / 2] = 0.0;
    return q;
}

std::vector<double> sample_depth_guided(double d_mu, double d_std, std::size_t K, double t_near, double t_far,
                                        const DepthSamplingConfig& cfg, const UniformSource& u)
{
    if (K == 0) throw InvalidArgument("sample_depth_guided: K must be >= 1");
    if (!std::isfinite(d_mu) || !std::isfinite(d_std)) throw InvalidArgument("sample_depth_guided: non-finite D_mu/D_std");
    if (d_std < 0.0) throw InvalidArgument("sample_depth_guided: D_std must be >= 0");
    if (!(t_near < t_far)) throw InvalidArgument("sample_depth_guided: need t_near < t_far");
    const double s = std::max(d_std, std_floor(t_near, t_far, cfg));
    std::vector<double> t;
    if (cfg.iid) {
        if (!u) throw InvalidArgument("sample_depth_guided: iid mode needs a uniform source");
        t.resize(K);
        for (double& v : t) {
            double p = u();
            while (p <= 0.0) p = u();
            v = d_mu + s * inverse_normal_cdf(p);
        }
        std::sort(t.begin(), t.end());
    } else {
        t = gaussian_quantiles(K);
        for (double& v : t) v = d_mu + s * v;
    }
    for (double& v : t) v = std::clamp(v, t_near, t_far);
    return t;
}

} // namespace rf::vr

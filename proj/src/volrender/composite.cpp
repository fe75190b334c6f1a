#include "rf/volrender/composite.hpp"

#include "rf/core/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rf::vr {

namespace {

void check_sorted(std::span<const double> t)
{
    if (t.empty()) throw InvalidArgument("composite: no samples");
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (!std::isfinite(t[k])) throw InvalidArgument("composite: non-finite depth");
        if (k > 0 && t[k] < t[k - 1])
            throw InvalidArgument("composite: depths not sorted at index " + std::to_string(k));
    }
}

struct LastInterval {
    double length;
    bool capped;  // true when t_far is the binding bound
};

LastInterval last_interval(std::span<const double> t, double t_far)
{
    const std::size_t K = t.size();
    const double tk = t[K - 1];
    if (K == 1) return {std::max(0.0, t_far - tk), true};
    const double mean_gap = (tk - t[0]) / static_cast<double>(K - 1);
    if (tk + mean_gap <= t_far) return {mean_gap, false};
    return {std::max(0.0, t_far - tk), true};
}

} // namespace

std::vector<double> interval_lengths(std::span<const double> t, double t_far)
{
    check_sorted(t);
    std::vector<double> d(t.size());
    for (std::size_t k = 0; k + 1 < t.size(); ++k) d[k] = t[k + 1] - t[k];
    d.back() = last_interval(t, t_far).length;
    return d;
}

CompositeResult composite(const RaySamples& s, double t_far)
{
    const std::size_t K = s.t.size();
    if (s.color.size() != K || s.sigma.size() != K)
        throw InvalidArgument("composite: depth/colour/density lengths differ");
    for (double sg : s.sigma)
        if (!(sg >= 0.0) || !std::isfinite(sg)) throw InvalidArgument("composite: density must be finite and >= 0");
    const std::vector<double> delta = interval_lengths(s.t, t_far);

    CompositeResult r;
    r.weights.resize(K);
    r.transmittance.resize(K);
    double optical = 0.0;
    double wt = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        const double T = std::exp(-optical);
        const double x = s.sigma[k] * delta[k];
        const double w = -T * std::expm1(-x);
        r.transmittance[k] = T;
        r.weights[k] = w;
        r.color += s.color[k] * w;
        r.alpha += w;
        wt += w * s.t[k];
        optical += x;
    }
    r.expected_depth = r.alpha > 0.0 ? wt / r.alpha : 0.0;
    r.alpha = std::min(r.alpha, 1.0);
    return r;
}

void composite_vjp(std::span<const double> t, std::span<const Vec3> color, std::span<const double> sigma,
                   double t_far, const Vec3& dcolor, double dalpha, std::span<double> dt, std::span<Vec3> dc,
                   std::span<double> dsigma)
{
    const std::size_t K = t.size();
    std::vector<double> delta(K);
    for (std::size_t k = 0; k + 1 < K; ++k) delta[k] = t[k + 1] - t[k];
    const LastInterval last = last_interval(t, t_far);
    delta[K - 1] = last.length;

    std::vector<double> T(K), a(K), w(K), g(K);
    double optical = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        const double x = sigma[k] * delta[k];
        T[k] = std::exp(-optical);
        a[k] = std::exp(-x);
        w[k] = -T[k] * std::expm1(-x);
        g[k] = geom::dot(dcolor, color[k]) + dalpha;
        dc[k] = dcolor * w[k];
        optical += x;
    }

    // dx_j = g_j T_j a_j - sum_{k>j} g_k w_k
    std::vector<double> ddelta(K);
    double tail = 0.0;
    for (std::size_t j = K; j-- > 0;) {
        const double dx = g[j] * T[j] * a[j] - tail;
        tail += g[j] * w[j];
        dsigma[j] = dx * delta[j];
        ddelta[j] = dx * sigma[j];
    }

    std::fill(dt.begin(), dt.end(), 0.0);
    for (std::size_t k = 0; k + 1 < K; ++k) {
        dt[k + 1] += ddelta[k];
        dt[k] -= ddelta[k];
    }
    if (last.capped) {
        if (last.length > 0.0) dt[K - 1] -= ddelta[K - 1];
    } else {
        const double inv = 1.0 / static_cast<double>(K - 1);
        dt[K - 1] += ddelta[K - 1] * inv;
        dt[0] -= ddelta[K - 1] * inv;
    }
}

} // namespace rf::vr

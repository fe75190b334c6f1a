#pragma once

#include "rf/core/rng.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace rf::vr {

// Source of uniform draws in [0, 1).
using UniformSource = std::function<double()>;

inline UniformSource uniform_source(Rng& rng)
{
    return [&rng] { return rng.uniform(); };
}

// Standard normal quantile function.
double inverse_normal_cdf(double p);

// One draw per equal-width bin of [t_near, t_far]; ascending.
std::vector<double> sample_uniform_stratified(double t_near, double t_far, std::size_t K, const UniformSource& u);

// Inverse-CDF draws from the piecewise-constant density proportional to `weights`
// over the bins [t_k, t_k + delta_k] (delta as in composite), stratified, then
// merged with the coarse depths. All-zero weights fall back to a uniform density.
std::vector<double> sample_hierarchical(std::span<const double> coarse_depths, std::span<const double> coarse_weights,
                                        std::size_t n_fine, double t_far, const UniformSource& u);

// Only the fine draws of sample_hierarchical, ascending.
std::vector<double> sample_fine(std::span<const double> coarse_depths, std::span<const double> coarse_weights,
                                std::size_t n_fine, double t_far, const UniformSource& u);

struct DepthSamplingConfig {
    double std_floor_fraction = 1e-4;  // of (t_far - t_near)
    bool iid = false;                  // raw N(mu, std) draws, sorted, instead of stratified quantiles
};

double std_floor(double t_near, double t_far, const DepthSamplingConfig& cfg = {});

// Quantile levels (k - 0.5) / K mapped through the normal quantile function.
std::vector<double> gaussian_quantiles(std::size_t K);

// t_k = clamp(mu + max(std, floor) * q_k, t_near, t_far). `u` is only consulted in iid mode.
std::vector<double> sample_depth_guided(double d_mu, double d_std, std::size_t K, double t_near, double t_far,
                                        const DepthSamplingConfig& cfg = {}, const UniformSource& u = {});

} // namespace rf::vr

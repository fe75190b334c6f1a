#pragma once

#include "rf/tensorgrad/tape.hpp"
#include "rf/volrender/samplers.hpp"

namespace rf::vr {

// Batched compositing over P rays: rgb [K,3,P], sigma [K,P], t [K,P] (ascending
// along K per ray) -> [4,P] holding composited r, g, b and alpha.
tg::Var composite_rays(tg::Var rgb, tg::Var sigma, tg::Var t, double t_far);

// Stratified-quantile depth placement for P rays: d_mu [P], d_std [P] -> [K,P].
// d_std is floored as in sample_depth_guided; clamped depths pass no gradient.
tg::Var depth_guided_depths(tg::Var d_mu, tg::Var d_std, std::size_t K, double t_near, double t_far,
                            const DepthSamplingConfig& cfg = {});

} // namespace rf::vr

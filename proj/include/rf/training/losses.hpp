#pragma once

#include "rf/core/image.hpp"
#include "rf/tensorgrad/tape.hpp"

namespace rf::train {

inline constexpr double kOpacityClamp = 1e-6;

// Foreground mask of a depth map: 1 where the depth is finite.
tg::Tensor foreground_mask(const Map& depth);

// mean(w * (pred - target)^2) over all C*H*W entries, where w = fg_weight on
// foreground pixels and 1 elsewhere. pred is [3,H,W]; mask is [H*W] (may be empty when fg_weight == 1).
tg::Var loss_photometric(tg::Var pred, const tg::Tensor& target_chw, const tg::Tensor& mask, double fg_weight = 1.0);

// Mean of (d_mu - depth)^2 over masked pixels; 0 for an empty mask. d_mu is [P].
tg::Var loss_depth(tg::Var d_mu, const Map& depth_gt, const tg::Tensor& mask);

// Mean of max(0, d_std - limit)^2 over all pixels.
tg::Var loss_std_hinge(tg::Var d_std, double limit);

// Mean binary cross-entropy of alpha against the mask, alpha clamped to [1e-6, 1 - 1e-6].
tg::Var loss_opacity(tg::Var alpha, const tg::Tensor& mask);

// Mean |d_mu - depth| over foreground pixels (0 when none).
double mean_foreground_depth_error(const Map& d_mu, const Map& depth_gt);

} // namespace rf::train

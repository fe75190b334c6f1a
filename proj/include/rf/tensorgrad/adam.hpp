#pragma once

#include "rf/tensorgrad/tape.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace rf::tg {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Moments are positional: entry i belongs to the i-th parameter passed to adam_step.
struct AdamState {
    AdamConfig config;
    std::uint64_t step = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;
};

// Bias-corrected Adam update; each parameter's step is scaled by its lr_mult.
// Parameters without an entry in `grads` are treated as having zero gradient.
void adam_step(std::span<Parameter* const> params, const Gradients& grads, AdamState& state);

} // namespace rf::tg

#pragma once

#include "rf/tensorgrad/tape.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>

namespace rf::tg {

struct GradCheckOptions {
    double step = 1e-5;
    // 0 checks every coordinate; otherwise a seeded subset of at most this many per parameter.
    std::size_t max_coords_per_param = 0;
    std::uint64_t seed = 0;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    std::size_t coords_checked = 0;
};

// Builds a scalar loss on the given tape; must register the checked parameters with tape.param().
using LossBuilder = std::function<Var(Tape&)>;

// Max over coordinates of |g_ad - g_fd| / max(1, |g_ad| + |g_fd|), central differences.
// Throws NumericError if the loss is non-finite at a perturbed point.
GradCheckReport grad_check(const LossBuilder& f, std::span<Parameter* const> params, const GradCheckOptions& opts = {});

} // namespace rf::tg

#pragma once

#include "rf/geometry/vec3.hpp"

#include <span>
#include <vector>

namespace rf::vr {

using geom::Vec3;

struct RaySamples {
    std::vector<double> t;      // ascending
    std::vector<Vec3> color;
    std::vector<double> sigma;  // >= 0

    std::size_t size() const { return t.size(); }
};

struct CompositeResult {
    Vec3 color;
    double alpha = 0.0;
    double expected_depth = 0.0;  // sum(w t) / sum(w), 0 when sum(w) = 0
    std::vector<double> weights;
    std::vector<double> transmittance;
};

// Interval lengths: t[k+1] - t[k], and for the last sample min(t_far, t_K + mean gap) - t_K.
// A single sample gets t_far - t_1. Throws InvalidArgument for empty or unsorted input.
std::vector<double> interval_lengths(std::span<const double> t, double t_far);

// Alpha compositing with prefix-sum transmittance. No background term.
// Throws InvalidArgument on unsorted depths, negative or non-finite densities, mismatched lengths.
CompositeResult composite(const RaySamples& samples, double t_far);

// Reverse-mode rule for composite(). dcolor/dalpha are the upstream gradients of
// the outputs; the sample gradients are written (not accumulated) into the spans.
void composite_vjp(std::span<const double> t, std::span<const Vec3> color, std::span<const double> sigma,
                   double t_far, const Vec3& dcolor, double dalpha, std::span<double> dt, std::span<Vec3> dc,
                   std::span<double> dsigma);

} // namespace rf::vr

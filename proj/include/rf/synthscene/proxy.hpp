#pragma once

#include "rf/geometry/vec3.hpp"
#include "rf/synthscene/latents.hpp"

#include <array>
#include <span>

namespace rf::synth {

using geom::Vec3;

// Analytic stand-in for a morphable face: an ellipsoid head, a smooth-unioned
// nose, two carved eye sockets, procedural albedo, and 20 Gaussian-bump
// expression fields.
struct FaceProxyScene {
    Vec3 head_radii;
    Vec3 nose_radii;
    Vec3 nose_center;
    std::array<double, 2> eye_radius{};
    std::array<Vec3, 2> eye_center{};
    Vec3 albedo_base;
    std::array<double, 2> blotch{};
    double k_s = 0.25;
    double shininess = 24.0;
    std::array<double, kExpDim> expr_amplitude{};

    // Radii positive, everything inside the unit sphere.
    bool satisfies_invariants() const;
};

// Fixed expression basis: B_i(p) = exp(-|p - c_i|^2 / (2 s^2)); the scene supplies the amplitude.
struct ExpressionBasis {
    std::array<Vec3, kExpDim> centers;
    double width;
};
const ExpressionBasis& expression_basis();

// Number of scalar proxy parameters produced from z_ID.
inline constexpr std::size_t kProxyParams = 20 + kExpDim;

// Deterministic affine projection of z_ID onto the parameter ranges, clamped;
// z_ID = 0 gives the mean face (every parameter at the centre of its range).
FaceProxyScene identity_to_proxy(std::span<const double> z_id);
FaceProxyScene mean_face();
// Flat parameter vector in projection order (testing and diagnostics).
std::array<double, kProxyParams> proxy_parameters(const FaceProxyScene& s);

// Undisplaced smooth-union geometry.
double sdf_base(const FaceProxyScene& s, const Vec3& p);
// Expression displacement sum_i z_exp_i * A_i * B_i(p); subtracted from the base distance.
double expression_displacement(const FaceProxyScene& s, std::span<const double> z_exp, const Vec3& p);
// Approximate signed distance: negative inside.
double sdf(const FaceProxyScene& s, std::span<const double> z_exp, const Vec3& p);
// Central-difference gradient (h = 1e-4), normalised.
Vec3 sdf_normal(const FaceProxyScene& s, std::span<const double> z_exp, const Vec3& p, double h = 1e-4);

Vec3 albedo_at(const FaceProxyScene& s, const Vec3& p);

} // namespace rf::synth

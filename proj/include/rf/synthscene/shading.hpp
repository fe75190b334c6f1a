#pragma once

#include "rf/geometry/vec3.hpp"
#include "rf/tensorgrad/tape.hpp"

#include <span>

namespace rf::synth {

using geom::Vec3;

struct Material {
    Vec3 albedo;
    double k_s = 0.25;
    double shininess = 24.0;
};

// Unit vector toward the light for z_ill's (yaw, pitch).
Vec3 light_direction(double yaw, double pitch);

// ambient * albedo + light * (albedo * max(0, n.l) + k_s * max(0, n.h)^p), h = normalize(l + v).
// Both light terms vanish when n.l <= 0. `shade_blinn_phong` clamps to [0, 1].
Vec3 shade_blinn_phong_unclamped(const Vec3& normal, const Vec3& view_dir, std::span<const double> z_ill,
                                 const Material& m);
Vec3 shade_blinn_phong(const Vec3& normal, const Vec3& view_dir, std::span<const double> z_ill, const Material& m);

// Differentiable form: normal[3], view[3], z_ill[8], albedo[3] -> rgb[3] (clamped).
tg::Var shade_blinn_phong(tg::Var normal, tg::Var view_dir, tg::Var z_ill, tg::Var albedo, double k_s, double shininess);

} // namespace rf::synth

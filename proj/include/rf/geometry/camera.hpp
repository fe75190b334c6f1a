#pragma once

#include "rf/geometry/vec3.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace rf::geom {

// Scene-wide camera constants. The proxy head lives inside the unit sphere and
// expression displacement keeps it inside radius 1.2; near/far bracket that
// with `bound_margin` to spare for every admissible camera distance.
struct CameraConfig {
    double base_radius = 3.0;          // r0
    double fov_y = 0.6;                // radians
    double max_angle = 0.5235987755982988; // pi/6, clamp for yaw and pitch
    double max_log_radius = 0.1;       // clamp for the log-radius offset
    double scene_radius = 1.2;
    double bound_margin = 0.2;

    double t_near() const;
    double t_far() const;
};

struct CameraPose {
    Vec3 position;
    // Rows: right, up, backward (camera looks along -row 2).
    Mat3 rotation;
    double fov_y = 0.6;
    double near = 1.0;
    double far = 5.0;

    Vec3 forward() const { return -rotation[2]; }
};

struct Ray {
    Vec3 origin;
    Vec3 direction;
    double t_near = 0.0;
    double t_far = 1.0;

    Vec3 at(double t) const { return origin + direction * t; }
};

struct RayGrid {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<Ray> rays;

    const Ray& at(std::size_t x, std::size_t y) const { return rays[y * width + x]; }
};

// z_cam = (yaw, pitch, log-radius offset); angles and offset are clamped to the config range.
CameraPose camera_from_z_cam(std::span<const double> z_cam, const CameraConfig& cfg = {});

// Look-at camera toward the origin with +y up.
CameraPose look_at_origin(const Vec3& position, double fov_y, double near, double far);

RayGrid generate_rays(const CameraPose& camera, std::size_t width, std::size_t height);

} // namespace rf::geom

#include "rf/geometry/camera.hpp"

#include "rf/core/error.hpp"

#include <algorithm>
#include <cmath>

namespace rf::geom {

double CameraConfig::t_near() const { return base_radius * std::exp(-max_log_radius) - scene_radius - bound_margin; }

double CameraConfig::t_far() const { return base_radius * std::exp(max_log_radius) + scene_radius + bound_margin; }

CameraPose look_at_origin(const Vec3& position, double fov_y, double near, double far)
{
    if (!(fov_y > 0.0 && fov_y < 3.141592653589793)) throw InvalidArgument("camera: fov must lie in (0, pi)");
    if (!(near > 0.0 && near < far)) throw InvalidArgument("camera: need 0 < near < far");
    const Vec3 back = normalize(position);
    const Vec3 right = normalize(cross(Vec3{0, 1, 0}, back));
    const Vec3 up = cross(back, right);
    return CameraPose{position, Mat3{right, up, back}, fov_y, near, far};
}

CameraPose camera_from_z_cam(std::span<const double> z_cam, const CameraConfig& cfg)
{
    if (z_cam.size() != 3) throw InvalidArgument("z_cam must have 3 entries");
    for (double v : z_cam)
        if (!std::isfinite(v)) throw InvalidArgument("z_cam must be finite");
    const double yaw = std::clamp(z_cam[0], -cfg.max_angle, cfg.max_angle);
    const double pitch = std::clamp(z_cam[1], -cfg.max_angle, cfg.max_angle);
    const double offset = std::clamp(z_cam[2], -cfg.max_log_radius, cfg.max_log_radius);
    const double r = cfg.base_radius * std::exp(offset);
    const Vec3 position{r * std::cos(pitch) * std::sin(yaw), r * std::sin(pitch), r * std::cos(pitch) * std::cos(yaw)};
    return look_at_origin(position, cfg.fov_y, cfg.t_near(), cfg.t_far());
}

RayGrid generate_rays(const CameraPose& camera, std::size_t width, std::size_t height)
{
    if (width < 1 || height < 1) throw InvalidArgument("generate_rays: image must be at least 1x1");
    RayGrid grid{width, height, {}};
    grid.rays.reserve(width * height);
    const double tan_half = std::tan(0.5 * camera.fov_y);
    const double aspect = static_cast<double>(width) / static_cast<double>(height);
    for (std::size_t y = 0; y < height; ++y) {
        const double v = (1.0 - 2.0 * (static_cast<double>(y) + 0.5) / static_cast<double>(height)) * tan_half;
        for (std::size_t x = 0; x < width; ++x) {
            const double u = (2.0 * (static_cast<double>(x) + 0.5) / static_cast<double>(width) - 1.0) * tan_half * aspect;
            const Vec3 d = normalize(mul_transposed(camera.rotation, Vec3{u, v, -1.0}));
            grid.rays.push_back(Ray{camera.position, d, camera.near, camera.far});
        }
    }
    return grid;
}

} // namespace rf::geom

#pragma once

#include "rf/core/image.hpp"
#include "rf/geometry/camera.hpp"
#include "rf/synthscene/latents.hpp"
#include "rf/synthscene/proxy.hpp"
#include "rf/synthscene/shading.hpp"

#include <limits>
#include <optional>
#include <span>

namespace rf::synth {

inline constexpr double kBackgroundDepth = std::numeric_limits<double>::infinity();

struct TraceOptions {
    double safety = 0.8;
    double tolerance = 1e-6;
    double min_step = 1e-5;
    int max_iterations = 4096;
};

// Distance t* of the first surface crossing inside [t_near, t_far], or kBackgroundDepth.
double trace_depth(const FaceProxyScene& scene, std::span<const double> z_exp, const geom::Ray& ray,
                   const TraceOptions& opts = {});

struct RenderOptions {
    geom::CameraConfig camera;
    // Overrides the pose derived from z_cam.
    std::optional<geom::CameraPose> pose;
    double background = 0.5;
    int workers = 1;
};

struct LabeledSample {
    Image image;
    Map depth;
    SceneLatents latents;
};

// Shaded surface colour seen along -view_dir at surface point p.
Vec3 shade_surface(const FaceProxyScene& scene, std::span<const double> z_exp, std::span<const double> z_ill,
                   const Vec3& p, const Vec3& view_dir);

LabeledSample render_ground_truth(const FaceProxyScene& scene, const SceneLatents& latents, std::size_t width,
                                  std::size_t height, const RenderOptions& opts = {});

struct OracleConfig {
    double sigma_max = 200.0;
    double eps_surf = 0.01;
};

struct FieldSample {
    Vec3 rgb;
    double sigma = 0.0;
};

// Continuous radiance-field view of the scene: sigma = sigma_max * logistic(-sdf / eps).
// Colour is the Blinn-Phong shade at the point's projection onto the zero level set,
// lit for a viewer in direction `view_dir` (pointing from the point toward the eye).
FieldSample oracle_field(const FaceProxyScene& scene, const SceneLatents& latents, const Vec3& point,
                         const Vec3& view_dir, const OracleConfig& cfg = {});

} // namespace rf::synth

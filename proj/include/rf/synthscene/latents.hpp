#pragma once

#include <json.hpp>

#include <cstddef>
#include <vector>

namespace rf::synth {

inline constexpr std::size_t kExpDim = 20;
inline constexpr std::size_t kCamDim = 3;
inline constexpr std::size_t kIllDim = 8;
inline constexpr std::size_t kDefaultIdDim = 64;

// z_ill layout: light yaw, light pitch, light RGB, ambient RGB.
struct SceneLatents {
    std::vector<double> z_id;
    std::vector<double> z_exp = std::vector<double>(kExpDim, 0.0);
    std::vector<double> z_cam = std::vector<double>(kCamDim, 0.0);
    std::vector<double> z_ill = std::vector<double>(kIllDim, 0.0);

    // Throws InvalidArgument when dimensions, finiteness or z_ill colour ranges are violated.
    void validate(std::size_t id_dim) const;
    bool operator==(const SceneLatents&) const = default;
};

struct Range {
    double lo, hi;
    double mid() const { return 0.5 * (lo + hi); }
};

// Sampling distributions of the synthetic dataset, and the box the fitter projects onto.
struct LatentRanges {
    Range cam_angle{-0.5235987755982988, 0.5235987755982988};
    Range cam_log_radius{-0.1, 0.1};
    Range light_yaw{-1.0, 1.0};
    Range light_pitch{-0.5, 0.7};
    Range light_rgb{0.6, 1.2};
    Range ambient_rgb{0.15, 0.45};

    // Clamp box, wider than the sampling box where the latent invariants allow.
    Range fit_light_angle{-1.5, 1.5};
    Range fit_rgb{0.0, 2.0};
};

// Arithmetic mean of the dataset illumination ranges.
std::vector<double> mean_illumination(const LatentRanges& ranges = {});

// Projects latents onto the admissible box (z_exp in [-1,1], camera and
// illumination per `ranges`).
void clamp_latents(SceneLatents& z, const LatentRanges& ranges = {});

nlohmann::json latents_to_json(const SceneLatents& z);
SceneLatents latents_from_json(const nlohmann::json& j);

} // namespace rf::synth

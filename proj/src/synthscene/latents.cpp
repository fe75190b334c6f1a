#include "rf/synthscene/latents.hpp"

#include "rf/core/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rf::synth {

void SceneLatents::validate(std::size_t id_dim) const
{
    auto check = [](const std::vector<double>& v, std::size_t n, const char* name) {
        if (v.size() != n)
            throw InvalidArgument(std::string(name) + " has " + std::to_string(v.size()) + " entries, expected " +
                                  std::to_string(n));
        for (double x : v)
            if (!std::isfinite(x)) throw InvalidArgument(std::string(name) + " contains a non-finite value");
    };
    check(z_id, id_dim, "z_id");
    check(z_exp, kExpDim, "z_exp");
    check(z_cam, kCamDim, "z_cam");
    check(z_ill, kIllDim, "z_ill");
    for (std::size_t i = 2; i < kIllDim; ++i)
        if (z_ill[i] < 0.0 || z_ill[i] > 2.0) throw InvalidArgument("z_ill colour entries must lie in [0, 2]");
}

std::vector<double> mean_illumination(const LatentRanges& r)
{
    const double l = r.light_rgb.mid(), a = r.ambient_rgb.mid();
    return {r.light_yaw.mid(), r.light_pitch.mid(), l, l, l, a, a, a};
}

void clamp_latents(SceneLatents& z, const LatentRanges& r)
{
    for (double& v : z.z_exp) v = std::clamp(v, -1.0, 1.0);
    z.z_cam[0] = std::clamp(z.z_cam[0], r.cam_angle.lo, r.cam_angle.hi);
    z.z_cam[1] = std::clamp(z.z_cam[1], r.cam_angle.lo, r.cam_angle.hi);
    z.z_cam[2] = std::clamp(z.z_cam[2], r.cam_log_radius.lo, r.cam_log_radius.hi);
    z.z_ill[0] = std::clamp(z.z_ill[0], r.fit_light_angle.lo, r.fit_light_angle.hi);
    z.z_ill[1] = std::clamp(z.z_ill[1], r.fit_light_angle.lo, r.fit_light_angle.hi);
    for (std::size_t i = 2; i < kIllDim; ++i) z.z_ill[i] = std::clamp(z.z_ill[i], r.fit_rgb.lo, r.fit_rgb.hi);
}

nlohmann::json latents_to_json(const SceneLatents& z)
{
    return {{"z_id", z.z_id}, {"z_exp", z.z_exp}, {"z_cam", z.z_cam}, {"z_ill", z.z_ill}};
}

SceneLatents latents_from_json(const nlohmann::json& j)
{
    try {
        SceneLatents z;
        z.z_id = j.at("z_id").get<std::vector<double>>();
        z.z_exp = j.at("z_exp").get<std::vector<double>>();
        z.z_cam = j.at("z_cam").get<std::vector<double>>();
        z.z_ill = j.at("z_ill").get<std::vector<double>>();
        return z;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("latents JSON: ") + e.what());
    }
}

} // namespace rf::synth

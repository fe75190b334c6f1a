#pragma once

#include "rf/core/image.hpp"
#include "rf/geometry/camera.hpp"
#include "rf/volrender/composite.hpp"
#include "rf/volrender/samplers.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <utility>

namespace rf::vr {

struct FieldValue {
    Vec3 rgb;
    double sigma = 0.0;
};

// Radiance field: (point, unit direction from the point toward the eye) -> colour and density.
using Field = std::function<FieldValue(const Vec3& point, const Vec3& view_dir)>;

struct DepthGuess {
    double mu;
    double std;
};

// Per-pixel depth Gaussian for the depth-guided sampler.
using DepthGuide = std::function<DepthGuess(std::size_t x, std::size_t y, const geom::Ray& ray)>;

enum class SamplerKind { Uniform, Hierarchical, DepthGuided };

struct SamplerSpec {
    SamplerKind kind = SamplerKind::Uniform;
    std::size_t samples = 64;   // K, or N_c for hierarchical
    std::size_t fine = 0;       // N_f
    DepthGuide guide;           // depth-guided only
    DepthSamplingConfig depth;  // depth-guided only

    // "uniform:K", "hierarchical:Nc+Nf", "depth:K"
    std::string name() const;
    std::size_t evaluations_per_ray() const;
};

// Parses the textual sampler names above. The guide of a depth-guided spec is left empty.
SamplerSpec parse_sampler(const std::string& text);

struct FieldRender {
    Image image;
    Map alpha;
    Map depth;  // expected depth, 0 where alpha = 0
    std::uint64_t evaluations = 0;
};

struct FieldRenderOptions {
    double background = 0.5;
    std::uint64_t seed = 0;  // per-pixel streams for stratified jitter
    int workers = 1;
};

FieldRender render_field(const Field& field, const geom::CameraPose& camera, const SamplerSpec& sampler,
                         std::size_t width, std::size_t height, const FieldRenderOptions& opts = {});

// 10 log10(1 / MSE) over all channels; identical images give the 99 dB sentinel.
inline constexpr double kPsnrSentinel = 99.0;
double psnr(const Image& a, const Image& b);
double mse(const Image& a, const Image& b);

} // namespace rf::vr

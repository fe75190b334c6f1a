#pragma once

#include "rf/core/image.hpp"
#include "rf/geometry/camera.hpp"
#include "rf/synthscene/latents.hpp"
#include "rf/tensorgrad/checkpoint.hpp"
#include "rf/tensorgrad/tape.hpp"
#include "rf/volrender/samplers.hpp"

#include <json.hpp>

#include <cstdint>
#include <vector>

namespace rf::gen {

struct GeneratorConfig {
    std::size_t width = 64;
    std::size_t height = 64;
    std::size_t K = 16;                // samples per ray
    std::size_t blocks = 4;            // 4x4 seed doubled per block
    std::size_t base_channels = 32;    // feature width up to 32x32
    std::size_t min_channels = 16;     // width floor once it halves past 32x32
    std::size_t id_dim = synth::kDefaultIdDim;
    std::size_t mapping_depth = 4;
    std::size_t mapping_width = 64;
    double mapping_lr_mult = 0.01;
    std::size_t cond_channels = 16;
    std::size_t pe_levels = 4;         // positional encoding of camera and light direction
    double background = 0.5;
    std::uint64_t init_seed = 0;
    geom::CameraConfig camera;
    vr::DepthSamplingConfig depth;

    // Throws InvalidArgument unless H = W = 4 * 2^blocks and K >= 2, widths >= 1.
    void validate() const;
    std::size_t output_channels() const { return 4 * K + 2; }
    std::size_t block_resolution(std::size_t b) const { return std::size_t{8} << b; }
    std::size_t block_channels(std::size_t b) const;
    std::size_t condition_dim() const { return synth::kExpDim + 2 * pe_levels * (3 + 3) + 6; }
    double t_near() const { return camera.t_near(); }
    double t_far() const { return camera.t_far(); }
    double std_floor() const { return vr::std_floor(t_near(), t_far(), depth); }

    nlohmann::json to_json() const;
    static GeneratorConfig from_json(const nlohmann::json& j);
};

// Latent inputs as tape variables; constants for training, parameters for fitting.
struct LatentVars {
    tg::Var z_id, z_exp, z_cam, z_ill;
};

LatentVars constant_latents(tg::Tape& tape, const synth::SceneLatents& z);

// Decoded sample grid. Maps are flattened over P = H * W pixels, row-major.
struct DecodedVars {
    tg::Var rgb;    // [K,3,P] in (0,1)
    tg::Var sigma;  // [K,P] >= 0
    tg::Var d_mu;   // [P]
    tg::Var d_std;  // [P] >= std floor
    tg::Var t;      // [K,P] ascending per pixel
};

struct RenderVars {
    tg::Var image;  // [3,H,W], background blended
    tg::Var alpha;  // [P]
    tg::Var d_mu;   // [P]
    tg::Var d_std;  // [P]
};

struct Rendered {
    Image image;
    Map alpha;
    Map d_mu;
    Map d_std;
};

class Generator {
public:
    explicit Generator(GeneratorConfig cfg);

    const GeneratorConfig& config() const { return cfg_; }

    // Stable order; pointers stay valid for the lifetime of this object.
    std::vector<tg::Parameter*> parameters();
    std::vector<const tg::Parameter*> parameters() const;
    std::size_t parameter_count() const;

    // z_id [d] -> w_ID [mapping_width]
    tg::Var mapping_network(tg::Tape& tape, tg::Var z_id) const;
    // Condition maps at each block resolution, [cond_channels, r, r].
    std::vector<tg::Var> condition_maps(tg::Tape& tape, tg::Var z_exp, tg::Var z_cam, tg::Var z_ill) const;
    // Sample grid [4K+2, H, W]: channel 4k+c is colour c of sample k, 4k+3 its density,
    // 4K and 4K+1 the raw depth mean and spread.
    tg::Var synthesize(tg::Tape& tape, tg::Var w_id, const std::vector<tg::Var>& cond) const;
    DecodedVars decode(tg::Tape& tape, tg::Var grid) const;
    // mapping -> condition -> synthesize -> decode -> composite -> background blend.
    RenderVars render(tg::Tape& tape, const LatentVars& z) const;

    Rendered forward(const synth::SceneLatents& z) const;

    // Field evaluations per image: one decoded sample per channel group and pixel.
    std::uint64_t evaluations_per_image() const { return std::uint64_t{cfg_.width} * cfg_.height * cfg_.K; }

    tg::Checkpoint to_checkpoint() const;
    static Generator from_checkpoint(const tg::Checkpoint& ck);

private:
    tg::Parameter& add(std::string name, tg::Shape shape, double lr_mult = 1.0);
    const tg::Parameter& get(const std::string& name) const;

    GeneratorConfig cfg_;
    std::vector<tg::Parameter> params_;
};

// Helpers between tape layouts and image containers.
Image image_from_chw(const tg::Tensor& chw);
tg::Tensor chw_from_image(const Image& img);
Map map_from_flat(const tg::Tensor& flat, std::size_t width, std::size_t height);

// Differentiable light direction from z_ill[0..1]: [8] -> [3].
tg::Var light_direction(tg::Var z_ill);

} // namespace rf::gen

#pragma once

#include "rf/core/image.hpp"
#include "rf/generator/generator.hpp"
#include "rf/synthscene/latents.hpp"

#include <json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rf::fit {

// Image -> features, with a distance between feature sets. Stands in for the
// perceptual, identity and landmark terms of the fitting objective.
class FeatureLoss {
public:
    virtual ~FeatureLoss() = default;
    virtual std::string name() const = 0;
    // image [3,H,W] -> feature tensors, recorded on the image's tape.
    virtual std::vector<tg::Var> features(tg::Var image) const = 0;
    // Default: sum of per-feature mean squared differences.
    virtual tg::Var distance(const std::vector<tg::Var>& a, const std::vector<tg::Var>& b) const;
};

// Multi-scale L2 over an average-pooled image pyramid.
class PyramidL2 final : public FeatureLoss {
public:
    explicit PyramidL2(std::size_t levels = 3) : levels_(levels) {}
    std::string name() const override { return "pyramid_l2"; }
    std::vector<tg::Var> features(tg::Var image) const override;

private:
    std::size_t levels_;
};

struct FitConfig {
    std::size_t latent_steps = 200;
    std::size_t finetune_steps = 50;
    double lr = 0.02;                   // latent learning rate
    double finetune_divisor = 200.0;    // weights use lr / divisor
    double lambda_pht = 1.0;
    double lambda_prior = 1e-4;         // on |z_ID|^2
    double lambda_feature = 1.0;        // plugin weight
    bool fit_identity = true;           // optimise z_ID alongside the other latents
    synth::LatentRanges ranges;

    void validate() const;
    nlohmann::json to_json() const;
    static FitConfig from_json(const nlohmann::json& j);
};

struct FitStep {
    std::size_t step = 0;  // global index over both phases
    int phase = 1;
    double loss = 0.0;
    double psnr = 0.0;

    nlohmann::json to_json() const;
};

struct FitResult {
    synth::SceneLatents latents;           // best iterate
    std::optional<gen::Generator> weights; // finetuned copy (phase 2 only)
    Image image;                           // render of the best iterate
    double loss = 0.0;                     // loss of the best iterate
    double psnr = 0.0;
    std::vector<FitStep> trace;
};

// Zero identity and expression, frontal camera, dataset-mean illumination.
synth::SceneLatents init_latents(std::size_t id_dim, const synth::LatentRanges& ranges = {});

// Phase 1: Adam on the latents only, projected onto the admissible box after each
// step. The model is not modified. Throws on resolution mismatch or non-finite loss.
FitResult fit_latents(const gen::Generator& model, const Image& target, const synth::SceneLatents& init,
                      const FitConfig& cfg, const FeatureLoss* plugin = nullptr);

// Phase 2: joint Adam over latents (lr) and a copy of the weights (lr / divisor),
// starting from the phase-1 result. `model` is never modified. The returned trace
// continues the phase-1 trace.
FitResult finetune_generator(const gen::Generator& model, const Image& target, const FitResult& phase1,
                             const FitConfig& cfg, const FeatureLoss* plugin = nullptr);

// Loss of the fitting objective for given latents and weights.
double fitting_loss(const gen::Generator& model, const Image& target, const synth::SceneLatents& z,
                    const FitConfig& cfg, const FeatureLoss* plugin = nullptr);

} // namespace rf::fit

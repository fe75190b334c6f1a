#pragma once

#include "rf/generator/generator.hpp"
#include "rf/synthscene/dataset.hpp"
#include "rf/tensorgrad/adam.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace rf::train {

struct TrainConfig {
    std::filesystem::path dataset;  // manifest.json, or a directory holding one
    std::filesystem::path out_dir;
    std::size_t batch_size = 1;
    std::size_t iterations = 500;
    double lr = 3e-3;
    double lambda_pht = 1.0;
    double lambda_depth = 1.0;
    double lambda_opacity = 0.1;
    double fg_weight = 1.0;              // 2 enables foreground reweighting of the photometric loss
    double std_hinge_fraction = 0.25;    // of (t_far - t_near)
    std::uint64_t seed = 0;
    std::size_t checkpoint_every = 0;    // 0: final checkpoint only
    std::size_t val_every = 10;          // psnr_val is null on other iterations
    std::size_t val_count = 8;
    bool wall_time = true;               // false writes secs = 0 for byte-comparable metrics
    int workers = 1;
    std::optional<std::filesystem::path> resume;
    gen::GeneratorConfig generator;

    void validate() const;
    nlohmann::json to_json() const;
    // Relative paths resolve against `base`.
    static TrainConfig from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
};

struct IterationMetrics {
    std::size_t iter = 0;
    double l_pht = 0.0;
    double l_depth = 0.0;
    double l_op = 0.0;
    std::optional<double> psnr_val;
    double secs = 0.0;

    nlohmann::json to_json() const;
};

// One JSON object per line, in iteration order.
std::string metrics_line(const IterationMetrics& m);

struct TrainingSet {
    std::filesystem::path root;
    synth::Manifest manifest;
    std::vector<synth::LoadedSample> samples;
};

TrainingSet load_training_set(const std::filesystem::path& dataset);

// Index of the b-th member of iteration `iter`'s batch under seeded per-epoch shuffles.
std::size_t batch_index(std::uint64_t seed, std::size_t dataset_size, std::size_t batch_size, std::size_t iter,
                        std::size_t member);

struct TrainResult {
    gen::Generator generator;
    std::vector<IterationMetrics> metrics;
    std::filesystem::path final_checkpoint;
};

using ProgressFn = std::function<void(const IterationMetrics&)>;

// Writes out_dir/metrics.jsonl, out_dir/ckpt_NNNNNN.rfck at the cadence and out_dir/final.rfck.
TrainResult train(const TrainConfig& config, const ProgressFn& progress = {});

// Generator plus optimizer state, resumable by train().
tg::Checkpoint training_checkpoint(const gen::Generator& g, const tg::AdamState& adam, std::size_t next_iter,
                                   const TrainConfig& cfg);

// Mean PSNR of the generator over the first `count` samples.
double validation_psnr(const gen::Generator& g, const std::vector<synth::LoadedSample>& samples, std::size_t count);

// Mean foreground |D_mu - depth| over the given samples.
double depth_error(const gen::Generator& g, const std::vector<synth::LoadedSample>& samples);

} // namespace rf::train

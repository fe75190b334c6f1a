#pragma once

#include "rf/synthscene/latents.hpp"
#include "rf/synthscene/render.hpp"
#include "rf/volrender/render_field.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace rf::bench {

inline constexpr const char* kReferenceSampler = "uniform:1024";

struct BenchOptions {
    std::uint64_t scene = 0;  // 0: mean face; otherwise sample 0 of the dataset stream with this seed
    std::size_t resolution = 64;
    std::vector<std::string> samplers{"uniform:16", "hierarchical:64+128", "depth:16"};
    std::size_t id_dim = synth::kDefaultIdDim;
    synth::OracleConfig oracle;
    std::uint64_t render_seed = 0;  // stratified jitter streams
    int workers = 1;
    bool wall_time = true;  // false records secs = 0
    // Secondary mode: time a trained generator's one-pass render of the same latents.
    std::optional<std::filesystem::path> generator;
};

struct BenchRow {
    std::string sampler;  // "uniform:K", "hierarchical:Nc+Nf", "depth:K", "generator:K"
    std::string kind;     // uniform | hierarchical | depth | generator
    std::size_t samples = 0;  // K, or N_c
    std::size_t fine = 0;     // N_f
    std::uint64_t evaluations = 0;  // per image
    double secs = 0.0;              // per image
    double psnr = 0.0;              // against the reference row
    bool reference = false;

    nlohmann::json to_json() const;
    static BenchRow from_json(const nlohmann::json& j);
};

struct BenchReport {
    std::uint64_t scene = 0;
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<BenchRow> rows;  // ascending evaluations, ties by name

    const BenchRow* find(const std::string& sampler) const;
    nlohmann::json to_json() const;
    // Throws FormatError on any schema violation.
    static BenchReport from_json(const nlohmann::json& j);
};

// Latents of the benchmark scene for a given seed.
synth::SceneLatents bench_latents(std::uint64_t scene, std::size_t id_dim = synth::kDefaultIdDim);

// Oracle field of a scene as a volrender field.
vr::Field oracle_as_field(const synth::FaceProxyScene& scene, const synth::SceneLatents& z,
                          const synth::OracleConfig& cfg = {});

// Ground-truth depth guide: N(trace_depth, 2 eps_surf) on hits, N(mid-range, range/4) on misses.
vr::DepthGuide traced_depth_guide(const synth::FaceProxyScene& scene, const synth::SceneLatents& z,
                                  const synth::OracleConfig& cfg = {});

// Renders the oracle scene under the reference sampler and every requested sampler.
// Throws InvalidArgument on an unknown sampler name.
BenchReport run_bench(const BenchOptions& opts);

} // namespace rf::bench

#pragma once

#include "rf/synthscene/latents.hpp"
#include "rf/synthscene/render.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace rf::synth {

struct ManifestEntry {
    std::string image;  // relative to the manifest directory
    std::string depth;
    SceneLatents latents;
};

struct Manifest {
    int version = 1;
    std::uint64_t seed = 0;
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<ManifestEntry> samples;
};

nlohmann::json manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const nlohmann::json& j);

inline constexpr const char* kManifestName = "manifest.json";

Manifest read_manifest(const std::filesystem::path& path);

struct DatasetOptions {
    std::size_t id_dim = kDefaultIdDim;
    LatentRanges ranges;
    RenderOptions render;
    bool force = false;
};

// Draws latents for sample `index`: z_ID ~ N(0, I), z_exp ~ U[-1, 1], camera and
// illumination uniform over `ranges`. Depends only on (seed, index).
SceneLatents sample_latents(std::uint64_t seed, std::size_t index, std::size_t id_dim, const LatentRanges& ranges = {});

// Renders `count` labelled samples into out_dir (PNG + RFD1 each) plus manifest.json.
// Refuses a non-empty out_dir unless opts.force. Output bytes depend only on the arguments.
Manifest generate_dataset(std::size_t count, std::size_t width, std::size_t height, std::uint64_t seed,
                          const std::filesystem::path& out_dir, const DatasetOptions& opts = {});

struct LoadedSample {
    Image image;
    Map depth;
    SceneLatents latents;
};

// Loads one manifest entry, resolving paths against the manifest's directory.
LoadedSample load_sample(const std::filesystem::path& manifest_dir, const ManifestEntry& entry);

} // namespace rf::synth

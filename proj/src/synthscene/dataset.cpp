#include "rf/synthscene/dataset.hpp"

#include "rf/core/error.hpp"
#include "rf/core/parallel.hpp"
#include "rf/core/rng.hpp"
#include "rf/synthscene/image_io.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>

namespace rf::synth {

namespace fs = std::filesystem;

nlohmann::json manifest_to_json(const Manifest& m)
{
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : m.samples) {
        nlohmann::json e = latents_to_json(s.latents);
        e["image"] = s.image;
        e["depth"] = s.depth;
        samples.push_back(std::move(e));
    }
    return {{"version", m.version}, {"seed", m.seed}, {"width", m.width}, {"height", m.height}, {"samples", samples}};
}

Manifest manifest_from_json(const nlohmann::json& j)
{
    try {
        Manifest m;
        m.version = j.at("version").get<int>();
        if (m.version != 1) throw FormatError("unsupported manifest version " + std::to_string(m.version));
        m.seed = j.at("seed").get<std::uint64_t>();
        m.width = j.at("width").get<std::size_t>();
        m.height = j.at("height").get<std::size_t>();
        for (const auto& e : j.at("samples"))
            m.samples.push_back({e.at("image").get<std::string>(), e.at("depth").get<std::string>(), latents_from_json(e)});
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    }
}

Manifest read_manifest(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    }
    return manifest_from_json(j);
}

SceneLatents sample_latents(std::uint64_t seed, std::size_t index, std::size_t id_dim, const LatentRanges& r)
{
    Rng rng(stream_seed(seed, index));
    SceneLatents z;
    z.z_id.resize(id_dim);
    for (double& v : z.z_id) v = rng.normal();
    for (double& v : z.z_exp) v = rng.uniform(-1.0, 1.0);
    z.z_cam = {rng.uniform(r.cam_angle.lo, r.cam_angle.hi), rng.uniform(r.cam_angle.lo, r.cam_angle.hi),
               rng.uniform(r.cam_log_radius.lo, r.cam_log_radius.hi)};
    z.z_ill[0] = rng.uniform(r.light_yaw.lo, r.light_yaw.hi);
    z.z_ill[1] = rng.uniform(r.light_pitch.lo, r.light_pitch.hi);
    for (int c = 0; c < 3; ++c) z.z_ill[2 + c] = rng.uniform(r.light_rgb.lo, r.light_rgb.hi);
    for (int c = 0; c < 3; ++c) z.z_ill[5 + c] = rng.uniform(r.ambient_rgb.lo, r.ambient_rgb.hi);
    return z;
}

Manifest generate_dataset(std::size_t count, std::size_t width, std::size_t height, std::uint64_t seed,
                          const fs::path& out_dir, const DatasetOptions& opts)
{
    std::error_code ec;
    if (fs::exists(out_dir, ec)) {
        if (!fs::is_directory(out_dir)) throw IoError(out_dir.string() + " exists and is not a directory");
        if (!fs::is_empty(out_dir) && !opts.force)
            throw IoError(out_dir.string() + " is not empty (use --force to overwrite)");
    } else {
        fs::create_directories(out_dir, ec);
        if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    }

    Manifest m;
    m.seed = seed;
    m.width = width;
    m.height = height;
    m.samples.resize(count);
    RenderOptions render = opts.render;
    const int sample_workers = render.workers;
    render.workers = 1;
    parallel_for(count, sample_workers, [&](std::size_t i) {
        SceneLatents z = sample_latents(seed, i, opts.id_dim, opts.ranges);
        const FaceProxyScene scene = identity_to_proxy(z.z_id);
        const LabeledSample s = render_ground_truth(scene, z, width, height, render);
        char name[32];
        std::snprintf(name, sizeof name, "%06zu", i);
        ManifestEntry e{std::string("img_") + name + ".png", std::string("depth_") + name + ".rfd", std::move(z)};
        write_png(out_dir / e.image, s.image);
        write_depth(out_dir / e.depth, s.depth);
        m.samples[i] = std::move(e);
    });

    std::ofstream out(out_dir / kManifestName, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write manifest in " + out_dir.string());
    out << manifest_to_json(m).dump(1) << '\n';
    if (!out) throw IoError("manifest write failed");
    return m;
}

LoadedSample load_sample(const fs::path& manifest_dir, const ManifestEntry& entry)
{
    return LoadedSample{read_png(manifest_dir / entry.image), read_depth(manifest_dir / entry.depth), entry.latents};
}

} // namespace rf::synth

#include "rf/volrender/render_field.hpp"

#include "rf/core/error.hpp"
#include "rf/core/parallel.hpp"
#include "rf/core/rng.hpp"
#include "rf/volrender/composite.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace rf::vr {

namespace {

std::size_t parse_count(std::string_view s, const std::string& whole)
{
    std::size_t v = 0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size() || v == 0)
        throw InvalidArgument("bad sampler spec '" + whole + "'");
    return v;
}

void evaluate(const Field& field, const geom::Ray& ray, std::span<const double> t, RaySamples& out)
{
    const Vec3 view = -ray.direction;
    for (double tk : t) {
        const FieldValue f = field(ray.at(tk), view);
        out.t.push_back(tk);
        out.color.push_back(f.rgb);
        out.sigma.push_back(f.sigma);
    }
}

} // namespace

std::string SamplerSpec::name() const
{
    switch (kind) {
    case SamplerKind::Uniform: return "uniform:" + std::to_string(samples);
    case SamplerKind::Hierarchical: return "hierarchical:" + std::to_string(samples) + "+" + std::to_string(fine);
    case SamplerKind::DepthGuided: return "depth:" + std::to_string(samples);
    }
    return {};
}

std::size_t SamplerSpec::evaluations_per_ray() const
{
    return kind == SamplerKind::Hierarchical ? samples + fine : samples;
}

SamplerSpec parse_sampler(const std::string& text)
{
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw InvalidArgument("unknown sampler '" + text + "'");
    const std::string kind = text.substr(0, colon);
    const std::string_view rest = std::string_view(text).substr(colon + 1);
    SamplerSpec s;
    if (kind == "uniform") {
        s.kind = SamplerKind::Uniform;
        s.samples = parse_count(rest, text);
    } else if (kind == "depth") {
        s.kind = SamplerKind::DepthGuided;
        s.samples = parse_count(rest, text);
    } else if (kind == "hierarchical") {
        const auto plus = rest.find('+');
        if (plus == std::string_view::npos) throw InvalidArgument("bad sampler spec '" + text + "'");
        s.kind = SamplerKind::Hierarchical;
        s.samples = parse_count(rest.substr(0, plus), text);
        s.fine = parse_count(rest.substr(plus + 1), text);
    } else {
        throw InvalidArgument("unknown sampler '" + text + "'");
    }
    return s;
}

FieldRender render_field(const Field& field, const geom::CameraPose& camera, const SamplerSpec& sampler,
                         std::size_t width, std::size_t height, const FieldRenderOptions& opts)
{
    if (sampler.kind == SamplerKind::DepthGuided && !sampler.guide)
        throw InvalidArgument("render_field: depth-guided sampler needs a depth guide");
    if (sampler.samples == 0) throw InvalidArgument("render_field: sampler needs at least one sample");
    const geom::RayGrid grid = geom::generate_rays(camera, width, height);

    FieldRender out{Image(width, height), Map(width, height), Map(width, height), 0};
    parallel_for(height, opts.workers, [&](std::size_t y) {
        RaySamples s;
        for (std::size_t x = 0; x < width; ++x) {
            const geom::Ray& ray = grid.at(x, y);
            Rng rng(stream_seed(opts.seed, y * width + x));
            const UniformSource u = uniform_source(rng);
            s.t.clear();
            s.color.clear();
            s.sigma.clear();
            switch (sampler.kind) {
            case SamplerKind::Uniform:
                evaluate(field, ray, sample_uniform_stratified(ray.t_near, ray.t_far, sampler.samples, u), s);
                break;
            case SamplerKind::DepthGuided: {
                const DepthGuess g = sampler.guide(x, y, ray);
                evaluate(field, ray,
                         sample_depth_guided(g.mu, g.std, sampler.samples, ray.t_near, ray.t_far, sampler.depth, u), s);
                break;
            }
            case SamplerKind::Hierarchical: {
                RaySamples coarse;
                evaluate(field, ray, sample_uniform_stratified(ray.t_near, ray.t_far, sampler.samples, u), coarse);
                const CompositeResult cr = composite(coarse, ray.t_far);
                RaySamples fine;
                evaluate(field, ray, sample_fine(coarse.t, cr.weights, sampler.fine, ray.t_far, u), fine);
                // stable merge of the two evaluated sets
                std::size_t i = 0, j = 0;
                while (i < coarse.size() || j < fine.size()) {
                    const bool take_coarse = j >= fine.size() || (i < coarse.size() && coarse.t[i] <= fine.t[j]);
                    const RaySamples& src = take_coarse ? coarse : fine;
                    const std::size_t idx = take_coarse ? i++ : j++;
                    s.t.push_back(src.t[idx]);
                    s.color.push_back(src.color[idx]);
                    s.sigma.push_back(src.sigma[idx]);
                }
                break;
            }
            }
            const CompositeResult r = composite(s, ray.t_far);
            const double bg = (1.0 - r.alpha) * opts.background;
            out.image.at(x, y, 0) = r.color.x + bg;
            out.image.at(x, y, 1) = r.color.y + bg;
            out.image.at(x, y, 2) = r.color.z + bg;
            out.alpha.at(x, y) = r.alpha;
            out.depth.at(x, y) = r.expected_depth;
        }
    });
    out.evaluations = static_cast<std::uint64_t>(width) * height * sampler.evaluations_per_ray();
    return out;
}

double mse(const Image& a, const Image& b)
{
    if (a.width != b.width || a.height != b.height || a.rgb.size() != b.rgb.size())
        throw InvalidArgument("psnr: image shapes differ");
    if (a.rgb.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < a.rgb.size(); ++i) {
        const double d = a.rgb[i] - b.rgb[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.rgb.size());
}

double psnr(const Image& a, const Image& b)
{
    const double m = mse(a, b);
    if (m <= 0.0) return kPsnrSentinel;
    return std::min(kPsnrSentinel, 10.0 * std::log10(1.0 / m));
}

} // namespace rf::vr

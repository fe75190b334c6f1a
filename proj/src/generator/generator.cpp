#include "rf/generator/generator.hpp"

#include "rf/core/error.hpp"
#include "rf/core/rng.hpp"
#include "rf/geometry/encoding.hpp"
#include "rf/tensorgrad/ops.hpp"
#include "rf/volrender/tape_ops.hpp"

#include <cmath>
#include <numeric>

namespace rf::gen {

using tg::Parameter;
using tg::Shape;
using tg::Tape;
using tg::Tensor;
using tg::Var;

namespace {

bool is_pow2(std::size_t v) { return v && !(v & (v - 1)); }

} // namespace

void GeneratorConfig::validate() const
{
    if (K < 2) throw InvalidArgument("generator: K must be >= 2");
    if (blocks < 1 || blocks > 8) throw InvalidArgument("generator: blocks must be in [1, 8]");
    const std::size_t res = std::size_t{4} << blocks;
    if (width != res || height != res || !is_pow2(width))
        throw InvalidArgument("generator: resolution " + std::to_string(width) + "x" + std::to_string(height) +
                              " is not reachable from a 4x4 seed in " + std::to_string(blocks) + " blocks");
    if (base_channels == 0 || min_channels == 0 || mapping_width == 0 || cond_channels == 0 || id_dim == 0)
        throw InvalidArgument("generator: widths must be >= 1");
    if (mapping_depth < 1) throw InvalidArgument("generator: mapping depth must be >= 1");
    if (pe_levels < 1) throw InvalidArgument("generator: positional encoding needs L >= 1");
    if (!(mapping_lr_mult > 0.0)) throw InvalidArgument("generator: mapping lr multiplier must be > 0");
}

std::size_t GeneratorConfig::block_channels(std::size_t b) const
{
    std::size_t c = base_channels;
    for (std::size_t r = block_resolution(b); r > 32; r /= 2) c /= 2;
    return std::max(c, std::min(min_channels, base_channels));
}

nlohmann::json GeneratorConfig::to_json() const
{
    return {{"width", width},
            {"height", height},
            {"K", K},
            {"blocks", blocks},
            {"base_channels", base_channels},
            {"min_channels", min_channels},
            {"id_dim", id_dim},
            {"mapping_depth", mapping_depth},
            {"mapping_width", mapping_width},
            {"mapping_lr_mult", mapping_lr_mult},
            {"cond_channels", cond_channels},
            {"pe_levels", pe_levels},
            {"background", background},
            {"init_seed", init_seed},
            {"camera", {{"base_radius", camera.base_radius}, {"fov_y", camera.fov_y}}},
            {"std_floor_fraction", depth.std_floor_fraction}};
}

GeneratorConfig GeneratorConfig::from_json(const nlohmann::json& j)
{
    GeneratorConfig c;
    try {
        c.width = j.value("width", c.width);
        c.height = j.value("height", c.height);
        c.K = j.value("K", c.K);
        c.blocks = j.value("blocks", c.blocks);
        c.base_channels = j.value("base_channels", c.base_channels);
        c.min_channels = j.value("min_channels", c.min_channels);
        c.id_dim = j.value("id_dim", c.id_dim);
        c.mapping_depth = j.value("mapping_depth", c.mapping_depth);
        c.mapping_width = j.value("mapping_width", c.mapping_width);
        c.mapping_lr_mult = j.value("mapping_lr_mult", c.mapping_lr_mult);
        c.cond_channels = j.value("cond_channels", c.cond_channels);
        c.pe_levels = j.value("pe_levels", c.pe_levels);
        c.background = j.value("background", c.background);
        c.init_seed = j.value("init_seed", c.init_seed);
        if (j.contains("camera")) {
            c.camera.base_radius = j["camera"].value("base_radius", c.camera.base_radius);
            c.camera.fov_y = j["camera"].value("fov_y", c.camera.fov_y);
        }
        c.depth.std_floor_fraction = j.value("std_floor_fraction", c.depth.std_floor_fraction);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("generator config: ") + e.what());
    }
    c.validate();
    return c;
}

LatentVars constant_latents(Tape& tape, const synth::SceneLatents& z)
{
    auto vec = [&](const std::vector<double>& v) { return tape.constant(Tensor(Shape{v.size()}, v)); };
    return {vec(z.z_id), vec(z.z_exp), vec(z.z_cam), vec(z.z_ill)};
}

Var light_direction(Var z_ill)
{
    if (z_ill.shape() != Shape{synth::kIllDim}) throw InvalidArgument("light_direction: z_ill must be [8]");
    const double yaw = z_ill.value()[0], pitch = z_ill.value()[1];
    const double cy = std::cos(yaw), sy = std::sin(yaw), cp = std::cos(pitch), sp = std::sin(pitch);
    Tensor out(Shape{3}, {cp * sy, sp, cp * cy});
    return z_ill.tape->record("light_direction", std::move(out), {z_ill},
                              [z_ill, cy, sy, cp, sp](Tape& t, const Tensor&, const Tensor& g) {
                                  if (Tensor* gz = t.grad_sink(z_ill)) {
                                      (*gz)[0] += g[0] * cp * cy - g[2] * cp * sy;
                                      (*gz)[1] += -g[0] * sp * sy + g[1] * cp - g[2] * sp * cy;
                                  }
                              });
}

Generator::Generator(GeneratorConfig cfg) : cfg_(std::move(cfg))
{
    cfg_.validate();
    const std::size_t D = cfg_.condition_dim();
    const std::size_t Cc = cfg_.cond_channels;
    const std::size_t W = cfg_.mapping_width;
    params_.reserve(16 + 8 * cfg_.blocks + 2 * cfg_.mapping_depth);

    std::size_t in = cfg_.id_dim;
    for (std::size_t i = 0; i < cfg_.mapping_depth; ++i) {
        add("map.fc" + std::to_string(i) + ".w", {W, in}, cfg_.mapping_lr_mult);
        add("map.fc" + std::to_string(i) + ".b", {W}, cfg_.mapping_lr_mult);
        in = W;
    }

    add("cond.affine1.w", {D + 2, D});
    add("cond.affine1.b", {D + 2}).value.fill(1.0);
    add("cond.conv1.w", {Cc, D + 2, 3, 3});
    add("cond.conv1.b", {Cc});
    add("cond.affine2.w", {Cc, D});
    add("cond.affine2.b", {Cc}).value.fill(1.0);
    add("cond.conv2.w", {Cc, Cc, 3, 3});
    add("cond.conv2.b", {Cc});

    std::size_t c = cfg_.block_channels(0);
    add("syn.seed", {c, 4, 4});
    for (std::size_t b = 0; b < cfg_.blocks; ++b) {
        const std::string p = "syn.b" + std::to_string(b) + ".";
        const std::size_t co = cfg_.block_channels(b);
        add(p + "affine.w", {c, W});
        add(p + "affine.b", {c}).value.fill(1.0);
        add(p + "conv.w", {co, c, 3, 3});
        add(p + "gamma.w", {co, Cc, 1, 1});
        add(p + "gamma.b", {co});
        add(p + "beta.w", {co, Cc, 1, 1});
        add(p + "beta.b", {co});
        c = co;
    }
    add("syn.out.w", {cfg_.output_channels(), c, 1, 1});
    add("syn.out.b", {cfg_.output_channels()});

    // Unit normal scaled by 1/sqrt(fan_in); biases zero unless set above; the seed stays unit normal.
    Rng rng(cfg_.init_seed);
    for (Parameter& p : params_) {
        const Shape& s = p.value.shape();
        const bool is_bias = p.name.ends_with(".b");
        if (is_bias) continue;
        const std::size_t fan_in = p.name == "syn.seed" ? 1 : tg::shape_size(s) / s[0];
        const double k = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] = rng.normal() * k;
    }
}

Parameter& Generator::add(std::string name, Shape shape, double lr_mult)
{
    params_.push_back(Parameter{std::move(name), Tensor(std::move(shape)), lr_mult});
    return params_.back();
}

const Parameter& Generator::get(const std::string& name) const
{
    for (const Parameter& p : params_)
        if (p.name == name) return p;
    throw InvalidArgument("generator: no parameter " + name);
}

std::vector<Parameter*> Generator::parameters()
{
    std::vector<Parameter*> out;
    for (Parameter& p : params_) out.push_back(&p);
    return out;
}

std::vector<const Parameter*> Generator::parameters() const
{
    std::vector<const Parameter*> out;
    for (const Parameter& p : params_) out.push_back(&p);
    return out;
}

std::size_t Generator::parameter_count() const
{
    std::size_t n = 0;
    for (const Parameter& p : params_) n += p.value.size();
    return n;
}

namespace {

// Read-only weights enter the tape as parameters so gradients are collected;
// the tape never writes through the pointer.
Var weight(Tape& t, const Parameter& p) { return t.param(const_cast<Parameter&>(p)); }

} // namespace

Var Generator::mapping_network(Tape& t, Var z_id) const
{
    if (z_id.shape() != Shape{cfg_.id_dim})
        throw InvalidArgument("mapping_network: z_ID has " + std::to_string(z_id.size()) + " entries, expected " +
                              std::to_string(cfg_.id_dim));
    Var x = tg::rms_normalize(z_id);
    for (std::size_t i = 0; i < cfg_.mapping_depth; ++i) {
        const std::string p = "map.fc" + std::to_string(i) + ".";
        x = tg::leaky_relu(tg::linear(x, weight(t, get(p + "w")), weight(t, get(p + "b"))));
    }
    return x;
}

std::vector<Var> Generator::condition_maps(Tape& t, Var z_exp, Var z_cam, Var z_ill) const
{
    if (z_exp.shape() != Shape{synth::kExpDim} || z_cam.shape() != Shape{synth::kCamDim} ||
        z_ill.shape() != Shape{synth::kIllDim})
        throw InvalidArgument("condition_maps: latent dimensions must be (20, 3, 8)");
    const std::size_t L = cfg_.pe_levels;
    Var v = tg::concat({z_exp, geom::positional_encode(z_cam, L), geom::positional_encode(light_direction(z_ill), L),
                        tg::slice_rows(z_ill, 2, 6)});

    constexpr std::size_t R = 8;
    Tensor coords(Shape{2, R, R});
    for (std::size_t y = 0; y < R; ++y)
        for (std::size_t x = 0; x < R; ++x) {
            coords[(0 * R + y) * R + x] = (static_cast<double>(x) + 0.5) / R * 2.0 - 1.0;
            coords[(1 * R + y) * R + x] = (static_cast<double>(y) + 0.5) / R * 2.0 - 1.0;
        }
    Var h = tg::concat({tg::broadcast_spatial(v, R, R), t.constant(std::move(coords))});

    auto modconv = [&](Var x, const std::string& n) {
        Var style = tg::linear(v, weight(t, get("cond.affine" + n + ".w")), weight(t, get("cond.affine" + n + ".b")));
        Var w = tg::modulate_weights(weight(t, get("cond.conv" + n + ".w")), style, true);
        return tg::leaky_relu(tg::add_channels(tg::conv2d(x, w, 1), weight(t, get("cond.conv" + n + ".b"))));
    };
    h = modconv(modconv(h, "1"), "2");

    std::vector<Var> maps;
    for (std::size_t b = 0; b < cfg_.blocks; ++b) {
        if (b > 0) h = tg::upsample2x(h);
        maps.push_back(h);
    }
    return maps;
}

Var Generator::synthesize(Tape& t, Var w_id, const std::vector<Var>& cond) const
{
    if (cond.size() != cfg_.blocks) throw InvalidArgument("synthesize: one condition map per block required");
    if (w_id.shape() != Shape{cfg_.mapping_width}) throw InvalidArgument("synthesize: w_ID width mismatch");
    Var x = weight(t, get("syn.seed"));
    for (std::size_t b = 0; b < cfg_.blocks; ++b) {
        const std::string p = "syn.b" + std::to_string(b) + ".";
        const std::size_t r = cfg_.block_resolution(b);
        if (cond[b].shape() != Shape{cfg_.cond_channels, r, r})
            throw InvalidArgument("synthesize: condition map " + std::to_string(b) + " has the wrong shape");
        x = tg::upsample2x(x);
        Var style = tg::linear(w_id, weight(t, get(p + "affine.w")), weight(t, get(p + "affine.b")));
        x = tg::conv2d(x, tg::modulate_weights(weight(t, get(p + "conv.w")), style, true), 1);
        x = tg::instance_norm(x);
        Var gamma = tg::add_channels(tg::conv2d(cond[b], weight(t, get(p + "gamma.w")), 0), weight(t, get(p + "gamma.b")));
        Var beta = tg::add_channels(tg::conv2d(cond[b], weight(t, get(p + "beta.w")), 0), weight(t, get(p + "beta.b")));
        x = tg::leaky_relu(tg::add(tg::mul(x, tg::add_scalar(gamma, 1.0)), beta));
    }
    return tg::add_channels(tg::conv2d(x, weight(t, get("syn.out.w")), 0), weight(t, get("syn.out.b")));
}

DecodedVars Generator::decode(Tape&, Var grid) const
{
    const std::size_t K = cfg_.K, N = cfg_.output_channels();
    const std::size_t P = cfg_.width * cfg_.height;
    if (grid.shape() != Shape{N, cfg_.height, cfg_.width}) throw InvalidArgument("decode: sample grid has the wrong shape");
    if (!grid.value().all_finite()) throw NumericError("decode: non-finite sample grid");
    Var flat = tg::reshape(grid, {N, P});

    std::vector<std::size_t> rgb_rows, sigma_rows;
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t c = 0; c < 3; ++c) rgb_rows.push_back(4 * k + c);
        sigma_rows.push_back(4 * k + 3);
    }
    DecodedVars d;
    d.rgb = tg::reshape(tg::sigmoid(tg::gather_rows(flat, rgb_rows)), {K, 3, P});
    d.sigma = tg::softplus(tg::gather_rows(flat, sigma_rows));
    const double tn = cfg_.t_near(), tf = cfg_.t_far();
    d.d_mu = tg::add_scalar(tg::scale(tg::sigmoid(tg::reshape(tg::slice_rows(flat, 4 * K, 1), {P})), tf - tn), tn);
    d.d_std = tg::add_scalar(tg::softplus(tg::reshape(tg::slice_rows(flat, 4 * K + 1, 1), {P})), cfg_.std_floor());
    d.t = vr::depth_guided_depths(d.d_mu, d.d_std, K, tn, tf, cfg_.depth);
    return d;
}

RenderVars Generator::render(Tape& t, const LatentVars& z) const
{
    const Var w = mapping_network(t, z.z_id);
    const Var grid = synthesize(t, w, condition_maps(t, z.z_exp, z.z_cam, z.z_ill));
    const DecodedVars d = decode(t, grid);
    const std::size_t P = cfg_.width * cfg_.height;
    const Var comp = vr::composite_rays(d.rgb, d.sigma, d.t, cfg_.t_far());
    const Var alpha = tg::slice_rows(comp, 3, 1);
    const Var alpha3 = tg::concat({alpha, alpha, alpha});
    const Var rgb = tg::add_scalar(tg::sub(tg::slice_rows(comp, 0, 3), tg::scale(alpha3, cfg_.background)), cfg_.background);
    return {tg::reshape(rgb, {3, cfg_.height, cfg_.width}), tg::reshape(alpha, {P}), d.d_mu, d.d_std};
}

Rendered Generator::forward(const synth::SceneLatents& z) const
{
    z.validate(cfg_.id_dim);
    Tape t;
    const RenderVars r = render(t, constant_latents(t, z));
    return {image_from_chw(r.image.value()), map_from_flat(r.alpha.value(), cfg_.width, cfg_.height),
            map_from_flat(r.d_mu.value(), cfg_.width, cfg_.height), map_from_flat(r.d_std.value(), cfg_.width, cfg_.height)};
}

tg::Checkpoint Generator::to_checkpoint() const
{
    tg::Checkpoint ck;
    ck.meta["kind"] = "generator";
    ck.meta["config"] = cfg_.to_json();
    ck.meta["seed"] = cfg_.init_seed;
    for (const Parameter& p : params_) ck.put(p.name, p.value);
    return ck;
}

Generator Generator::from_checkpoint(const tg::Checkpoint& ck)
{
    if (ck.meta.value("kind", std::string("generator")) != "generator")
        throw FormatError("checkpoint kind is " + ck.meta["kind"].dump() + ", expected \"generator\"");
    if (!ck.meta.contains("config")) throw FormatError("checkpoint has no generator config");
    Generator g(GeneratorConfig::from_json(ck.meta["config"]));
    for (Parameter& p : g.params_) {
        const Tensor* v = ck.find(p.name);
        if (!v) throw FormatError("checkpoint is missing tensor " + p.name);
        if (v->shape() != p.value.shape())
            throw FormatError("checkpoint tensor " + p.name + " has shape " + tg::shape_string(v->shape()) +
                              ", expected " + tg::shape_string(p.value.shape()));
        p.value = *v;
    }
    return g;
}

Image image_from_chw(const Tensor& chw)
{
    if (chw.rank() != 3 || chw.shape()[0] != 3) throw InvalidArgument("image_from_chw: expected [3,H,W]");
    const std::size_t H = chw.shape()[1], W = chw.shape()[2];
    Image img(W, H);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < H; ++y)
            for (std::size_t x = 0; x < W; ++x) img.at(x, y, c) = chw[(c * H + y) * W + x];
    return img;
}

Tensor chw_from_image(const Image& img)
{
    Tensor t(Shape{3, img.height, img.width});
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < img.height; ++y)
            for (std::size_t x = 0; x < img.width; ++x) t[(c * img.height + y) * img.width + x] = img.at(x, y, c);
    return t;
}

Map map_from_flat(const Tensor& flat, std::size_t width, std::size_t height)
{
    if (flat.size() != width * height) throw InvalidArgument("map_from_flat: size mismatch");
    Map m(width, height);
    for (std::size_t i = 0; i < m.values.size(); ++i) m.values[i] = flat[i];
    return m;
}

} // namespace rf::gen

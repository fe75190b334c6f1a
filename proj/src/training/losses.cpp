#include "rf/training/losses.hpp"

#include "rf/core/error.hpp"
#include "rf/tensorgrad/ops.hpp"

#include <cmath>

namespace rf::train {

using tg::Shape;
using tg::Tensor;
using tg::Var;

Tensor foreground_mask(const Map& depth)
{
    Tensor m(Shape{depth.values.size()});
    for (std::size_t i = 0; i < depth.values.size(); ++i) m[i] = std::isfinite(depth.values[i]) ? 1.0 : 0.0;
    return m;
}

Var loss_photometric(Var pred, const Tensor& target, const Tensor& mask, double fg_weight)
{
    tg::require_same_shape(pred.value(), target, "loss_photometric");
    if (!(fg_weight >= 0.0)) throw InvalidArgument("loss_photometric: foreground weight must be >= 0");
    Var err = tg::square(tg::sub(pred, pred.tape->constant(target)));
    if (fg_weight == 1.0) return tg::mean(err);
    const std::size_t P = mask.size();
    if (pred.value().rank() != 3 || pred.shape()[0] * P != pred.size())
        throw InvalidArgument("loss_photometric: mask must have one entry per pixel");
    Tensor w(pred.shape());
    for (std::size_t c = 0; c < pred.shape()[0]; ++c)
        for (std::size_t p = 0; p < P; ++p) w[c * P + p] = mask[p] > 0.5 ? fg_weight : 1.0;
    return tg::mean(tg::mul(err, pred.tape->constant(std::move(w))));
}

Var loss_depth(Var d_mu, const Map& depth_gt, const Tensor& mask)
{
    const std::size_t P = depth_gt.values.size();
    if (d_mu.shape() != Shape{P} || mask.size() != P) throw InvalidArgument("loss_depth: shape mismatch");
    std::vector<bool> on(P);
    double n = 0.0;
    for (std::size_t p = 0; p < P; ++p) {
        on[p] = mask[p] > 0.5 && std::isfinite(depth_gt.values[p]);
        n += on[p];
    }
    Tensor gt(Shape{P}), w(Shape{P});
    for (std::size_t p = 0; p < P; ++p) {
        gt[p] = on[p] ? depth_gt.values[p] : 0.0;
        w[p] = on[p] ? 1.0 / n : 0.0;
    }
    tg::Tape& t = *d_mu.tape;
    return tg::sum(tg::mul(tg::square(tg::sub(d_mu, t.constant(std::move(gt)))), t.constant(std::move(w))));
}

Var loss_std_hinge(Var d_std, double limit)
{
    return tg::mean(tg::square(tg::relu(tg::add_scalar(d_std, -limit))));
}

Var loss_opacity(Var alpha, const Tensor& mask)
{
    tg::require_same_shape(alpha.value(), mask, "loss_opacity");
    tg::Tape& t = *alpha.tape;
    Tensor inv(mask.shape());
    for (std::size_t i = 0; i < mask.size(); ++i) inv[i] = 1.0 - mask[i];
    Var a = tg::clamp(alpha, kOpacityClamp, 1.0 - kOpacityClamp);
    Var pos = tg::mul(tg::log(a), t.constant(mask));
    Var negl = tg::mul(tg::log(tg::add_scalar(tg::neg(a), 1.0)), t.constant(std::move(inv)));
    return tg::neg(tg::mean(tg::add(pos, negl)));
}

double mean_foreground_depth_error(const Map& d_mu, const Map& depth_gt)
{
    if (d_mu.values.size() != depth_gt.values.size()) throw InvalidArgument("depth error: shape mismatch");
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < d_mu.values.size(); ++i)
        if (std::isfinite(depth_gt.values[i])) {
            acc += std::fabs(d_mu.values[i] - depth_gt.values[i]);
            ++n;
        }
    return n ? acc / static_cast<double>(n) : 0.0;
}

} // namespace rf::train

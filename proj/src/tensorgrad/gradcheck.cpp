#include "rf/tensorgrad/gradcheck.hpp"

#include "rf/core/error.hpp"
#include "rf/core/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rf::tg {

namespace {

double eval_loss(const LossBuilder& f)
{
    Tape tape;
    const double v = f(tape).value().item();
    if (!std::isfinite(v)) throw NumericError("grad_check: loss is non-finite at a perturbed point");
    return v;
}

std::vector<std::size_t> pick_coords(std::size_t n, std::size_t limit, Rng& rng)
{
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (limit == 0 || limit >= n) return idx;
    for (std::size_t i = 0; i < limit; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
    idx.resize(limit);
    std::sort(idx.begin(), idx.end());
    return idx;
}

} // namespace

GradCheckReport grad_check(const LossBuilder& f, std::span<Parameter* const> params, const GradCheckOptions& opts)
{
    Gradients analytic;
    {
        Tape tape;
        const Var loss = f(tape);
        if (!std::isfinite(loss.value().item())) throw NumericError("grad_check: loss is non-finite");
        analytic = tape.backward(loss);
    }

    GradCheckReport report;
    Rng rng(opts.seed);
    for (Parameter* p : params) {
        const Tensor* g = analytic.find(*p);
        const std::vector<std::size_t> coords = pick_coords(p->value.size(), opts.max_coords_per_param, rng);
        for (std::size_t i : coords) {
            const double orig = p->value[i];
            p->value[i] = orig + opts.step;
            const double up = eval_loss(f);
            p->value[i] = orig - opts.step;
            const double down = eval_loss(f);
            p->value[i] = orig;
            const double fd = (up - down) / (2.0 * opts.step);
            const double ad = g ? (*g)[i] : 0.0;
            const double err = std::abs(ad - fd) / std::max(1.0, std::abs(ad) + std::abs(fd));
            ++report.coords_checked;
            if (err > report.max_rel_error || report.coords_checked == 1) {
                report.max_rel_error = err;
                report.worst_param = p->name;
                report.worst_index = i;
            }
        }
    }
    return report;
}

} // namespace rf::tg

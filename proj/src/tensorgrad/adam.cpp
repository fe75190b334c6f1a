#include "rf/tensorgrad/adam.hpp"

#include "rf/core/error.hpp"

#include <cmath>

namespace rf::tg {

void adam_step(std::span<Parameter* const> params, const Gradients& grads, AdamState& state)
{
    const AdamConfig& cfg = state.config;
    if (!(cfg.lr > 0.0)) throw InvalidArgument("adam: learning rate must be positive");
    if (state.m.empty() && state.v.empty()) {
        for (Parameter* p : params) {
            state.m.emplace_back(p->value.shape());
            state.v.emplace_back(p->value.shape());
        }
    }
    if (state.m.size() != params.size() || state.v.size() != params.size())
        throw InvalidArgument("adam: state holds " + std::to_string(state.m.size()) + " moments for " +
                              std::to_string(params.size()) + " parameters");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (state.m[i].shape() != params[i]->value.shape() || state.v[i].shape() != params[i]->value.shape())
            throw InvalidArgument("adam: moment shape mismatch for '" + params[i]->name + "'");
        if (const Tensor* g = grads.find(*params[i])) {
            require_same_shape(*g, params[i]->value, "adam gradient");
            if (!g->all_finite()) throw NumericError("adam: non-finite gradient for '" + params[i]->name + "'");
        }
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = *params[i];
        const Tensor* g = grads.find(p);
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        const double lr = cfg.lr * p.lr_mult;
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            const double gj = g ? (*g)[j] : 0.0;
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
            p.value[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg.eps);
        }
    }
}

} // namespace rf::tg

#include "rf/tensorgrad/ops.hpp"

#include "rf/core/error.hpp"
#include "rf/kernels/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rf::tg {

namespace {

Tape& tape_of(Var v)
{
    if (!v.tape) throw InvalidArgument("operation on an unbound variable");
    return *v.tape;
}

void require_same(Var a, Var b, const char* op)
{
    if (a.tape != b.tape) throw InvalidArgument(std::string(op) + ": operands live on different tapes");
    require_same_shape(a.value(), b.value(), op);
}

// f(x) forward, df(x, y) local derivative given input and output.
template <typename F, typename DF>
Var unary(const char* op, Var a, F f, DF df)
{
    const Tensor& x = a.value();
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
    return tape_of(a).record(op, std::move(out), {a}, [a, df](Tape& t, const Tensor& y, const Tensor& g) {
        if (Tensor* ga = t.grad_sink(a)) {
            const Tensor& x = t.value(a);
            for (std::size_t i = 0; i < x.size(); ++i) (*ga)[i] += g[i] * df(x[i], y[i]);
        }
    });
}

void require_chw(const Tensor& t, const char* op)
{
    if (t.rank() != 3) throw InvalidArgument(std::string(op) + ": expected [C,H,W], got " + shape_string(t.shape()));
}

} // namespace

Var add(Var a, Var b)
{
    require_same(a, b, "add");
    Tensor out = a.value();
    out.add_scaled(b.value());
    return tape_of(a).record("add", std::move(out), {a, b}, [a, b](Tape& t, const Tensor&, const Tensor& g) {
        if (Tensor* ga = t.grad_sink(a)) ga->add_scaled(g);
        if (Tensor* gb = t.grad_sink(b)) gb->add_scaled(g);
    });
}

Var sub(Var a, Var b)
{
    require_same(a, b, "sub");
    Tensor out = a.value();
    out.add_scaled(b.value(), -1.0);
    return tape_of(a).record("sub", std::move(out), {a, b}, [a, b](Tape& t, const Tensor&, const Tensor& g) {
        if (Tensor* ga = t.grad_sink(a)) ga->add_scaled(g);
        if (Tensor* gb = t.grad_sink(b)) gb->add_scaled(g, -1.0);
    });
}

Var mul(Var a, Var b)
{
    require_same(a, b, "mul");
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
    return tape_of(a).record("mul", std::move(out), {a, b}, [a, b](Tape& t, const Tensor&, const Tensor& g) {
        const Tensor& x = t.value(a);
        const Tensor& y = t.value(b);
        if (Tensor* ga = t.grad_sink(a))
            for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * y[i];
        if (Tensor* gb = t.grad_sink(b))
            for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * x[i];
    });
}

Var scale(Var a, double c)
{
    Tensor out(a.shape());
    out.add_scaled(a.value(), c);
    return tape_of(a).record("scale", std::move(out), {a}, [a, c](Tape& t, const Tensor&, const Tensor& g) {
        if (Tensor* ga = t.grad_sink(a)) ga->add_scaled(g, c);
    });
}

Var add_scalar(Var a, double c)
{
    Tensor out = a.value();
    for (double& v : out.storage()) v += c;
    return tape_of(a).record("add_scalar", std::move(out), {a}, [a](Tape& t, const Tensor&, const Tensor& g) {
        if (Tensor* ga = t.grad_sink(a)) ga->add_scaled(g);
    });
}

Var neg(Var a) { return scale(a, -1.0); }

Var square(Var a)
{
    return unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var exp(Var a)
{
    return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a)
{
    for (double v : a.value().values())
        if (!(v > 0.0)) throw NumericError("log: non-positive input");
    return unary("log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var sigmoid(Var a)
{
    return unary(
        "sigmoid", a,
        [](double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
        [](double, double y) { return y * (1.0 - y); });
}

Var softplus(Var a)
{
    return unary(
        "softplus", a, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
        [](double x, double) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); });
}

Var relu(Var a)
{
    return unary("relu", a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var leaky_relu(Var a, double slope)
{
    return unary(
        "leaky_relu", a, [slope](double x) { return x > 0 ? x : slope * x; },
        [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}

Var clamp(Var a, double lo, double hi)
{
    return unary(
        "clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
        [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var sum(Var a)
{
    double s = 0.0;
    for (double v : a.value().values()) s += v;
    return tape_of(a).record("sum", Tensor::scalar(s), {a}, [a](Tape& t, const Tensor&, const Tensor& g) {
        if (Tensor* ga = t.grad_sink(a))
            for (double& v : ga->storage()) v += g[0];
    });
}

Var mean(Var a)
{
    const double n = static_cast<double>(a.size());
    if (n == 0) throw InvalidArgument("mean of an empty tensor");
    return scale(sum(a), 1.0 / n);
}

Var mse(Var a, Var b)
{
    require_same(a, b, "mse");
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    const double n = static_cast<double>(x.size());
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
    return tape_of(a).record("mse", Tensor::scalar(s / n), {a, b}, [a, b, n](Tape& t, const Tensor&, const Tensor& g) {
        const Tensor& x = t.value(a);
        const Tensor& y = t.value(b);
        const double k = 2.0 * g[0] / n;
        if (Tensor* ga = t.grad_sink(a))
            for (std::size_t i = 0; i < x.size(); ++i) (*ga)[i] += k * (x[i] - y[i]);
        if (Tensor* gb = t.grad_sink(b))
            for (std::size_t i = 0; i < x.size(); ++i) (*gb)[i] -= k * (x[i] - y[i]);
    });
}

Var reshape(Var a, Shape shape)
{
    Tensor out = a.value().reshaped(std::move(shape));
    return tape_of(a).record("reshape", std::move(out), {a}, [a](Tape& t, const Tensor&, const Tensor& g) {
        if (Tensor* ga = t.grad_sink(a))
            kernels::axpy(g.size(), 1.0, g.data(), ga->data());
    });
}

Var concat(const std::vector<Var>& parts)
{
    if (parts.empty()) throw InvalidArgument("concat: no inputs");
    const Shape& first = parts[0].shape();
    Shape trailing(first.begin() + 1, first.end());
    std::size_t rows = 0;
    for (const Var& p : parts) {
        const Shape& s = p.shape();
        if (s.empty() || Shape(s.begin() + 1, s.end()) != trailing || p.tape != parts[0].tape)
            throw InvalidArgument("concat: incompatible shape " + shape_string(s));
        rows += s[0];
    }
    Shape out_shape = first;
    out_shape[0] = rows;
    Tensor out(out_shape);
    std::size_t offset = 0;
    for (const Var& p : parts) {
        std::copy(p.value().values().begin(), p.value().values().end(), out.data() + offset);
        offset += p.size();
    }
    return tape_of(parts[0]).record("concat", std::move(out), parts, [parts](Tape& t, const Tensor&, const Tensor& g) {
        std::size_t offset = 0;
        for (const Var& p : parts) {
            const std::size_t n = t.value(p).size();
            if (Tensor* gp = t.grad_sink(p)) kernels::axpy(n, 1.0, g.data() + offset, gp->data());
            offset += n;
        }
    });
}

Var gather_rows(Var a, std::vector<std::size_t> rows)
{
    const Tensor& x = a.value();
    if (x.rank() == 0) throw InvalidArgument("gather_rows: rank-0 input");
    const std::size_t stride = x.size() / x.dim(0);
    for (std::size_t r : rows)
        if (r >= x.dim(0)) throw InvalidArgument("gather_rows: index out of range");
    Shape s = x.shape();
    s[0] = rows.size();
    Tensor out(s);
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy_n(x.data() + rows[i] * stride, stride, out.data() + i * stride);
    return tape_of(a).record("gather_rows", std::move(out), {a},
                             [a, rows = std::move(rows), stride](Tape& t, const Tensor&, const Tensor& g) {
                                 if (Tensor* ga = t.grad_sink(a))
                                     for (std::size_t i = 0; i < rows.size(); ++i)
                                         kernels::axpy(stride, 1.0, g.data() + i * stride, ga->data() + rows[i] * stride);
                             });
}

Var slice_rows(Var a, std::size_t begin, std::size_t count)
{
    std::vector<std::size_t> rows(count);
    for (std::size_t i = 0; i < count; ++i) rows[i] = begin + i;
    return gather_rows(a, std::move(rows));
}

Var linear(Var x, Var weight, Var bias)
{
    const Tensor& xv = x.value();
    const Tensor& w = weight.value();
    const Tensor& b = bias.value();
    if (w.rank() != 2 || xv.size() != w.dim(1) || b.size() != w.dim(0))
        throw InvalidArgument("linear: shapes " + shape_string(xv.shape()) + " x " + shape_string(w.shape()) + " + " +
                              shape_string(b.shape()));
    const std::size_t m = w.dim(0), n = w.dim(1);
    Tensor out(Shape{m});
    for (std::size_t i = 0; i < m; ++i) out[i] = b[i] + kernels::dot(n, w.data() + i * n, xv.data());
    return tape_of(x).record("linear", std::move(out), {x, weight, bias},
                             [x, weight, bias, m, n](Tape& t, const Tensor&, const Tensor& g) {
                                 const Tensor& xv = t.value(x);
                                 const Tensor& w = t.value(weight);
                                 if (Tensor* gx = t.grad_sink(x))
                                     for (std::size_t i = 0; i < m; ++i) kernels::axpy(n, g[i], w.data() + i * n, gx->data());
                                 if (Tensor* gw = t.grad_sink(weight))
                                     for (std::size_t i = 0; i < m; ++i) kernels::axpy(n, g[i], xv.data(), gw->data() + i * n);
                                 if (Tensor* gb = t.grad_sink(bias)) gb->add_scaled(g);
                             });
}

Var rms_normalize(Var z, double eps)
{
    const Tensor& x = z.value();
    const double n = static_cast<double>(x.size());
    double ms = 0.0;
    for (double v : x.values()) ms += v * v;
    ms /= n;
    const double rms = std::sqrt(ms);
    const bool floored = rms < eps;
    const double r = 1.0 / (floored ? eps : rms);
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * r;
    return tape_of(z).record("rms_normalize", std::move(out), {z}, [z, r, n, floored](Tape& t, const Tensor& y, const Tensor& g) {
        if (Tensor* gz = t.grad_sink(z)) {
            // d y_i / d x_j = r (delta_ij - y_i y_j / n), or r delta_ij below the floor
            const double gy = floored ? 0.0 : kernels::dot(g.size(), g.data(), y.data());
            for (std::size_t i = 0; i < g.size(); ++i) (*gz)[i] += r * (g[i] - y[i] * gy / n);
        }
    });
}

Var broadcast_spatial(Var v, std::size_t h, std::size_t w)
{
    const Tensor& x = v.value();
    const std::size_t n = x.size(), hw = h * w;
    Tensor out(Shape{n, h, w});
    for (std::size_t c = 0; c < n; ++c) std::fill_n(out.data() + c * hw, hw, x[c]);
    return tape_of(v).record("broadcast_spatial", std::move(out), {v}, [v, n, hw](Tape& t, const Tensor&, const Tensor& g) {
        if (Tensor* gv = t.grad_sink(v))
            for (std::size_t c = 0; c < n; ++c) {
                double s = 0.0;
                for (std::size_t i = 0; i < hw; ++i) s += g[c * hw + i];
                (*gv)[c] += s;
            }
    });
}

Var mul_channels(Var x, Var s)
{
    const Tensor& xv = x.value();
    const Tensor& sv = s.value();
    if (xv.rank() < 1 || sv.size() != xv.dim(0)) throw InvalidArgument("mul_channels: shape mismatch");
    const std::size_t c = xv.dim(0), inner = xv.size() / c;
    Tensor out(xv.shape());
    for (std::size_t k = 0; k < c; ++k)
        for (std::size_t i = 0; i < inner; ++i) out[k * inner + i] = xv[k * inner + i] * sv[k];
    return tape_of(x).record("mul_channels", std::move(out), {x, s}, [x, s, c, inner](Tape& t, const Tensor&, const Tensor& g) {
        const Tensor& xv = t.value(x);
        const Tensor& sv = t.value(s);
        if (Tensor* gx = t.grad_sink(x))
            for (std::size_t k = 0; k < c; ++k) kernels::axpy(inner, sv[k], g.data() + k * inner, gx->data() + k * inner);
        if (Tensor* gs = t.grad_sink(s))
            for (std::size_t k = 0; k < c; ++k) (*gs)[k] += kernels::dot(inner, g.data() + k * inner, xv.data() + k * inner);
    });
}

Var add_channels(Var x, Var b)
{
    const Tensor& xv = x.value();
    const Tensor& bv = b.value();
    if (xv.rank() < 1 || bv.size() != xv.dim(0)) throw InvalidArgument("add_channels: shape mismatch");
    const std::size_t c = xv.dim(0), inner = xv.size() / c;
    Tensor out = xv;
    for (std::size_t k = 0; k < c; ++k)
        for (std::size_t i = 0; i < inner; ++i) out[k * inner + i] += bv[k];
    return tape_of(x).record("add_channels", std::move(out), {x, b}, [x, b, c, inner](Tape& t, const Tensor&, const Tensor& g) {
        if (Tensor* gx = t.grad_sink(x)) gx->add_scaled(g);
        if (Tensor* gb = t.grad_sink(b))
            for (std::size_t k = 0; k < c; ++k) {
                double s = 0.0;
                for (std::size_t i = 0; i < inner; ++i) s += g[k * inner + i];
                (*gb)[k] += s;
            }
    });
}

namespace {

struct ConvGeometry {
    std::size_t c, h, w, o, k, pad, oh, ow;
};

// cols[(ci*k + ky)*k + kx, oy*ow + ox] = x[ci, oy+ky-pad, ox+kx-pad] (zero outside)
void im2col(const double* x, const ConvGeometry& g, double* cols)
{
    const std::size_t ohw = g.oh * g.ow;
    for (std::size_t ci = 0; ci < g.c; ++ci)
        for (std::size_t ky = 0; ky < g.k; ++ky)
            for (std::size_t kx = 0; kx < g.k; ++kx) {
                double* row = cols + ((ci * g.k + ky) * g.k + kx) * ohw;
                for (std::size_t oy = 0; oy < g.oh; ++oy) {
                    const long iy = static_cast<long>(oy + ky) - static_cast<long>(g.pad);
                    double* dst = row + oy * g.ow;
                    if (iy < 0 || iy >= static_cast<long>(g.h)) {
                        std::fill_n(dst, g.ow, 0.0);
                        continue;
                    }
                    const double* src = x + (ci * g.h + static_cast<std::size_t>(iy)) * g.w;
                    for (std::size_t ox = 0; ox < g.ow; ++ox) {
                        const long ix = static_cast<long>(ox + kx) - static_cast<long>(g.pad);
                        dst[ox] = (ix < 0 || ix >= static_cast<long>(g.w)) ? 0.0 : src[ix];
                    }
                }
            }
}

void col2im_add(const double* cols, const ConvGeometry& g, double* x)
{
    const std::size_t ohw = g.oh * g.ow;
    for (std::size_t ci = 0; ci < g.c; ++ci)
        for (std::size_t ky = 0; ky < g.k; ++ky)
            for (std::size_t kx = 0; kx < g.k; ++kx) {
                const double* row = cols + ((ci * g.k + ky) * g.k + kx) * ohw;
                for (std::size_t oy = 0; oy < g.oh; ++oy) {
                    const long iy = static_cast<long>(oy + ky) - static_cast<long>(g.pad);
                    if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
                    double* dst = x + (ci * g.h + static_cast<std::size_t>(iy)) * g.w;
                    const double* src = row + oy * g.ow;
                    for (std::size_t ox = 0; ox < g.ow; ++ox) {
                        const long ix = static_cast<long>(ox + kx) - static_cast<long>(g.pad);
                        if (ix >= 0 && ix < static_cast<long>(g.w)) dst[ix] += src[ox];
                    }
                }
            }
}

} // namespace

Var conv2d(Var x, Var weight, std::size_t pad)
{
    const Tensor& xv = x.value();
    const Tensor& w = weight.value();
    require_chw(xv, "conv2d");
    if (w.rank() != 4 || w.dim(1) != xv.dim(0) || w.dim(2) != w.dim(3))
        throw InvalidArgument("conv2d: weight " + shape_string(w.shape()) + " incompatible with input " +
                              shape_string(xv.shape()));
    ConvGeometry g{xv.dim(0), xv.dim(1), xv.dim(2), w.dim(0), w.dim(2), pad, 0, 0};
    if (xv.dim(1) + 2 * pad < g.k || xv.dim(2) + 2 * pad < g.k) throw InvalidArgument("conv2d: kernel larger than input");
    g.oh = g.h + 2 * pad - g.k + 1;
    g.ow = g.w + 2 * pad - g.k + 1;
    const std::size_t ohw = g.oh * g.ow, ckk = g.c * g.k * g.k;
    const bool direct = g.k == 1 && pad == 0;

    Tensor cols;
    if (!direct) {
        cols = Tensor(Shape{ckk, ohw});
        im2col(xv.data(), g, cols.data());
    }
    Tensor out(Shape{g.o, g.oh, g.ow});
    kernels::gemm(g.o, ohw, ckk, w.data(), ckk, direct ? xv.data() : cols.data(), ohw, out.data(), ohw, false);

    return tape_of(x).record(
        "conv2d", std::move(out), {x, weight},
        [x, weight, g, direct, cols = std::move(cols)](Tape& t, const Tensor&, const Tensor& gout) {
            const std::size_t ohw = g.oh * g.ow, ckk = g.c * g.k * g.k;
            const Tensor& w = t.value(weight);
            const double* colsp = direct ? t.value(x).data() : cols.data();
            if (Tensor* gw = t.grad_sink(weight))
                for (std::size_t o = 0; o < g.o; ++o)
                    for (std::size_t r = 0; r < ckk; ++r)
                        (*gw)[o * ckk + r] += kernels::dot(ohw, gout.data() + o * ohw, colsp + r * ohw);
            if (Tensor* gx = t.grad_sink(x)) {
                Tensor wt(Shape{ckk, g.o});
                for (std::size_t o = 0; o < g.o; ++o)
                    for (std::size_t r = 0; r < ckk; ++r) wt[r * g.o + o] = w[o * ckk + r];
                if (direct) {
                    kernels::gemm(ckk, ohw, g.o, wt.data(), g.o, gout.data(), ohw, gx->data(), ohw, true);
                } else {
                    Tensor dcols(Shape{ckk, ohw});
                    kernels::gemm(ckk, ohw, g.o, wt.data(), g.o, gout.data(), ohw, dcols.data(), ohw, false);
                    col2im_add(dcols.data(), g, gx->data());
                }
            }
        });
}

Var modulate_weights(Var weight, Var style, bool demodulate, double eps)
{
    const Tensor& w = weight.value();
    const Tensor& s = style.value();
    if (w.rank() != 4 || s.size() != w.dim(1))
        throw InvalidArgument("modulate_weights: style " + shape_string(s.shape()) + " vs weight " + shape_string(w.shape()));
    const std::size_t o = w.dim(0), c = w.dim(1), kk = w.dim(2) * w.dim(3);
    Tensor modulated(w.shape());
    std::vector<double> demod(o, 1.0);
    for (std::size_t oi = 0; oi < o; ++oi) {
        double ss = 0.0;
        for (std::size_t ci = 0; ci < c; ++ci)
            for (std::size_t r = 0; r < kk; ++r) {
                const std::size_t idx = (oi * c + ci) * kk + r;
                modulated[idx] = w[idx] * s[ci];
                ss += modulated[idx] * modulated[idx];
            }
        if (demodulate) demod[oi] = 1.0 / std::sqrt(ss + eps);
    }
    Tensor out = modulated;
    for (std::size_t oi = 0; oi < o; ++oi)
        for (std::size_t i = 0; i < c * kk; ++i) out[oi * c * kk + i] *= demod[oi];

    return tape_of(weight).record(
        "modulate_weights", std::move(out), {weight, style},
        [weight, style, o, c, kk, demodulate, modulated = std::move(modulated), demod = std::move(demod)](
            Tape& t, const Tensor&, const Tensor& g) {
            const Tensor& w = t.value(weight);
            const Tensor& s = t.value(style);
            Tensor du(w.shape());
            for (std::size_t oi = 0; oi < o; ++oi) {
                const std::size_t base = oi * c * kk;
                const double d = demod[oi];
                double gu = 0.0;
                if (demodulate)
                    for (std::size_t i = 0; i < c * kk; ++i) gu += g[base + i] * modulated[base + i];
                for (std::size_t i = 0; i < c * kk; ++i)
                    du[base + i] = d * g[base + i] - (demodulate ? modulated[base + i] * d * d * d * gu : 0.0);
            }
            Tensor* gw = t.grad_sink(weight);
            Tensor* gs = t.grad_sink(style);
            for (std::size_t oi = 0; oi < o; ++oi)
                for (std::size_t ci = 0; ci < c; ++ci)
                    for (std::size_t r = 0; r < kk; ++r) {
                        const std::size_t idx = (oi * c + ci) * kk + r;
                        if (gw) (*gw)[idx] += du[idx] * s[ci];
                        if (gs) (*gs)[ci] += du[idx] * w[idx];
                    }
        });
}

namespace {

struct Tap {
    std::size_t i0, i1;
    double w0, w1;
};

std::vector<Tap> upsample_taps(std::size_t n)
{
    std::vector<Tap> taps(2 * n);
    for (std::size_t j = 0; j < n; ++j) {
        taps[2 * j] = {j, j == 0 ? 0 : j - 1, 0.75, 0.25};
        taps[2 * j + 1] = {j, j + 1 < n ? j + 1 : n - 1, 0.75, 0.25};
    }
    return taps;
}

} // namespace

Var upsample2x(Var x)
{
    const Tensor& xv = x.value();
    require_chw(xv, "upsample2x");
    const std::size_t c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    const auto ty = upsample_taps(h);
    const auto tx = upsample_taps(w);
    Tensor out(Shape{c, 2 * h, 2 * w});
    for (std::size_t ci = 0; ci < c; ++ci) {
        const double* src = xv.data() + ci * h * w;
        double* dst = out.data() + ci * 4 * h * w;
        for (std::size_t oy = 0; oy < 2 * h; ++oy) {
            const Tap& a = ty[oy];
            for (std::size_t ox = 0; ox < 2 * w; ++ox) {
                const Tap& b = tx[ox];
                dst[oy * 2 * w + ox] = a.w0 * (b.w0 * src[a.i0 * w + b.i0] + b.w1 * src[a.i0 * w + b.i1]) +
                                       a.w1 * (b.w0 * src[a.i1 * w + b.i0] + b.w1 * src[a.i1 * w + b.i1]);
            }
        }
    }
    return tape_of(x).record("upsample2x", std::move(out), {x}, [x, c, h, w, ty, tx](Tape& t, const Tensor&, const Tensor& g) {
        Tensor* gx = t.grad_sink(x);
        if (!gx) return;
        for (std::size_t ci = 0; ci < c; ++ci) {
            double* dst = gx->data() + ci * h * w;
            const double* src = g.data() + ci * 4 * h * w;
            for (std::size_t oy = 0; oy < 2 * h; ++oy) {
                const Tap& a = ty[oy];
                for (std::size_t ox = 0; ox < 2 * w; ++ox) {
                    const Tap& b = tx[ox];
                    const double v = src[oy * 2 * w + ox];
                    dst[a.i0 * w + b.i0] += a.w0 * b.w0 * v;
                    dst[a.i0 * w + b.i1] += a.w0 * b.w1 * v;
                    dst[a.i1 * w + b.i0] += a.w1 * b.w0 * v;
                    dst[a.i1 * w + b.i1] += a.w1 * b.w1 * v;
                }
            }
        }
    });
}

Var avgpool2x(Var x)
{
    const Tensor& xv = x.value();
    require_chw(xv, "avgpool2x");
    const std::size_t c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    if (h % 2 || w % 2) throw InvalidArgument("avgpool2x: odd spatial extent " + shape_string(xv.shape()));
    const std::size_t oh = h / 2, ow = w / 2;
    Tensor out(Shape{c, oh, ow});
    for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t x0 = 0; x0 < ow; ++x0) {
                const double* s = xv.data() + (ci * h + 2 * y) * w + 2 * x0;
                out[(ci * oh + y) * ow + x0] = 0.25 * (s[0] + s[1] + s[w] + s[w + 1]);
            }
    return tape_of(x).record("avgpool2x", std::move(out), {x}, [x, c, h, w, oh, ow](Tape& t, const Tensor&, const Tensor& g) {
        Tensor* gx = t.grad_sink(x);
        if (!gx) return;
        for (std::size_t ci = 0; ci < c; ++ci)
            for (std::size_t y = 0; y < oh; ++y)
                for (std::size_t x0 = 0; x0 < ow; ++x0) {
                    const double v = 0.25 * g[(ci * oh + y) * ow + x0];
                    double* d = gx->data() + (ci * h + 2 * y) * w + 2 * x0;
                    d[0] += v;
                    d[1] += v;
                    d[w] += v;
                    d[w + 1] += v;
                }
    });
}

Var instance_norm(Var x, double eps)
{
    const Tensor& xv = x.value();
    require_chw(xv, "instance_norm");
    const std::size_t c = xv.dim(0), n = xv.dim(1) * xv.dim(2);
    Tensor out(xv.shape());
    std::vector<double> inv_std(c);
    for (std::size_t ci = 0; ci < c; ++ci) {
        const double* s = xv.data() + ci * n;
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i) m += s[i];
        m /= static_cast<double>(n);
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) v += (s[i] - m) * (s[i] - m);
        v /= static_cast<double>(n);
        inv_std[ci] = 1.0 / std::sqrt(v + eps);
        for (std::size_t i = 0; i < n; ++i) out[ci * n + i] = (s[i] - m) * inv_std[ci];
    }
    return tape_of(x).record("instance_norm", std::move(out), {x},
                             [x, c, n, inv_std = std::move(inv_std)](Tape& t, const Tensor& y, const Tensor& g) {
                                 Tensor* gx = t.grad_sink(x);
                                 if (!gx) return;
                                 const double nn = static_cast<double>(n);
                                 for (std::size_t ci = 0; ci < c; ++ci) {
                                     const double* gy = g.data() + ci * n;
                                     const double* yy = y.data() + ci * n;
                                     double gm = 0.0, gym = 0.0;
                                     for (std::size_t i = 0; i < n; ++i) {
                                         gm += gy[i];
                                         gym += gy[i] * yy[i];
                                     }
                                     gm /= nn;
                                     gym /= nn;
                                     double* d = gx->data() + ci * n;
                                     for (std::size_t i = 0; i < n; ++i) d[i] += inv_std[ci] * (gy[i] - gm - yy[i] * gym);
                                 }
                             });
}

} // namespace rf::tg

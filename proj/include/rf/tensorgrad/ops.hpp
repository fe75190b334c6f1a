#pragma once

#include "rf/tensorgrad/tape.hpp"

#include <cstddef>
#include <vector>

// Differentiable operations recorded on a Tape. Feature maps are [C, H, W].
namespace rf::tg {

// Elementwise, equal shapes.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);

Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var neg(Var a);
Var square(Var a);
Var exp(Var a);
Var log(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var relu(Var a);
Var leaky_relu(Var a, double slope = 0.2);
// Gradient is zero where the input is clamped.
Var clamp(Var a, double lo, double hi);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double c, Var a) { return scale(a, c); }

Var sum(Var a);
Var mean(Var a);
// mean((a - b)^2)
Var mse(Var a, Var b);

Var reshape(Var a, Shape shape);
// Concatenation along axis 0; trailing extents must agree.
Var concat(const std::vector<Var>& parts);
// Rows (axis-0 slices) picked by index, in the given order.
Var gather_rows(Var a, std::vector<std::size_t> rows);
Var slice_rows(Var a, std::size_t begin, std::size_t count);

// x[n] -> W[m, n] x + b[m]
Var linear(Var x, Var weight, Var bias);
// z / max(rms(z), eps)
Var rms_normalize(Var z, double eps = 1e-8);

// v[n] -> [n, h, w]
Var broadcast_spatial(Var v, std::size_t h, std::size_t w);
// x[C, ...] scaled / shifted by a per-channel vector s[C]
Var mul_channels(Var x, Var s);
Var add_channels(Var x, Var b);

// Stride-1 convolution with zero padding `pad`: x[C,H,W], w[O,C,k,k] -> [O, H+2p-k+1, W+2p-k+1].
Var conv2d(Var x, Var weight, std::size_t pad);
// Style modulation of conv weights w[O,C,k,k] by s[C], with optional per-output demodulation.
Var modulate_weights(Var weight, Var style, bool demodulate, double eps = 1e-8);
// Bilinear x2 upsampling (half-pixel centres, edge clamped).
Var upsample2x(Var x);
// 2x2 average pooling; H and W must be even.
Var avgpool2x(Var x);
// Per-channel normalisation over spatial positions, no affine.
Var instance_norm(Var x, double eps = 1e-5);

} // namespace rf::tg

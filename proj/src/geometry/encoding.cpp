#include "rf/geometry/encoding.hpp"

#include "rf/core/error.hpp"

#include <cmath>
#include <numbers>

namespace rf::geom {

std::vector<double> positional_encode(std::span<const double> v, std::size_t frequencies)
{
    if (frequencies < 1) throw InvalidArgument("positional_encode: need at least one frequency");
    std::vector<double> out;
    out.reserve(2 * frequencies * v.size());
    for (double x : v) {
        double scale = std::numbers::pi;
        for (std::size_t j = 0; j < frequencies; ++j, scale *= 2.0) {
            out.push_back(std::sin(scale * x));
            out.push_back(std::cos(scale * x));
        }
    }
    return out;
}

tg::Var positional_encode(tg::Var v, std::size_t frequencies)
{
    std::vector<double> enc = positional_encode(v.value().values(), frequencies);
    tg::Tensor out = tg::Tensor::vector(std::move(enc));
    return v.tape->record("positional_encode", std::move(out), {v},
                          [v, frequencies](tg::Tape& t, const tg::Tensor& y, const tg::Tensor& g) {
                              tg::Tensor* gv = t.grad_sink(v);
                              if (!gv) return;
                              for (std::size_t i = 0; i < gv->size(); ++i) {
                                  double scale = std::numbers::pi;
                                  for (std::size_t j = 0; j < frequencies; ++j, scale *= 2.0) {
                                      const std::size_t k = 2 * (i * frequencies + j);
                                      // d sin = scale cos, d cos = -scale sin
                                      (*gv)[i] += scale * (g[k] * y[k + 1] - g[k + 1] * y[k]);
                                  }
                              }
                          });
}

} // namespace rf::geom

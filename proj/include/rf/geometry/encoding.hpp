#pragma once

#include "rf/tensorgrad/tape.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace rf::geom {

// For each coordinate v_i and frequency j < L: (sin(2^j pi v_i), cos(2^j pi v_i)).
std::vector<double> positional_encode(std::span<const double> v, std::size_t frequencies);

// Same map recorded on a tape: v[n] -> [2 L n].
tg::Var positional_encode(tg::Var v, std::size_t frequencies);

} // namespace rf::geom

#pragma once

#include <cstddef>
#include <vector>

namespace rf {

// Interleaved RGB, row-major, values nominally in [0, 1].
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> rgb;

    Image() = default;
    Image(std::size_t w, std::size_t h, double fill = 0.0) : width(w), height(h), rgb(w * h * 3, fill) {}

    double& at(std::size_t x, std::size_t y, std::size_t c) { return rgb[(y * width + x) * 3 + c]; }
    double at(std::size_t x, std::size_t y, std::size_t c) const { return rgb[(y * width + x) * 3 + c]; }
    bool operator==(const Image&) const = default;
};

// Single-channel map (depth, alpha). Background depth is +infinity.
struct Map {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> values;

    Map() = default;
    Map(std::size_t w, std::size_t h, double fill = 0.0) : width(w), height(h), values(w * h, fill) {}

    double& at(std::size_t x, std::size_t y) { return values[y * width + x]; }
    double at(std::size_t x, std::size_t y) const { return values[y * width + x]; }
    bool operator==(const Map&) const = default;
};

} // namespace rf

#pragma once

#include "rf/core/rng.hpp"
#include "rf/tensorgrad/tensor.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace rf::testutil {

inline tg::Tensor random_tensor(tg::Shape shape, Rng& rng, double scale = 1.0)
{
    tg::Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
    return t;
}

inline tg::Tensor uniform_tensor(tg::Shape shape, Rng& rng, double lo, double hi)
{
    tg::Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    const auto p = std::filesystem::temp_directory_path() / ("rf_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace rf::testutil

#pragma once

#include "rf/generator/generator.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace rf::diag {

struct SuiteConfig {
    double op_tolerance = 1e-6;
    double end_to_end_tolerance = 1e-4;
    std::size_t trials = 2;                  // random points per isolated op
    std::size_t end_to_end_coords = 12;      // per generator parameter
    std::uint64_t seed = 0;
    gen::GeneratorConfig generator = default_generator();

    // 16x16, K = 4, narrow layers.
    static gen::GeneratorConfig default_generator();
    void validate() const;
    nlohmann::json to_json() const;
    static SuiteConfig from_json(const nlohmann::json& j);
};

struct CheckResult {
    std::string name;   // tape op under test, or "end_to_end"
    std::string group;  // composite | shading | encoder | network | end_to_end
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    std::size_t coords = 0;
    std::string worst_param;
    double secs = 0.0;

    bool passed() const { return max_rel_error < tolerance; }
    nlohmann::json to_json() const;
};

// Finite-difference checks of the differentiable ops in isolation, then of the
// pixel loss through the generator.
std::vector<CheckResult> run_gradcheck_suite(const SuiteConfig& cfg = {});

} // namespace rf::diag

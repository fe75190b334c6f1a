#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rfcli {

namespace fs = std::filesystem;

// Semantically invalid flags; mapped to exit code 2 like parse errors.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DatasetArgs {
    std::size_t count = 0;
    std::size_t width = 64;
    std::size_t height = 64;
    std::uint64_t seed = 0;
    std::size_t id_dim = 64;
    fs::path out;
    bool force = false;
    int workers = 1;
};

struct TrainArgs {
    fs::path config;
    std::optional<int> workers;
};

struct RenderArgs {
    fs::path checkpoint;
    fs::path latents;
    fs::path out;
    std::optional<fs::path> depth;
};

struct FitArgs {
    fs::path checkpoint;
    fs::path target;
    fs::path out;
    std::optional<fs::path> config;
    std::optional<fs::path> init;
    bool finetune = false;
    bool force = false;
};

struct BenchArgs {
    std::uint64_t scene = 0;
    std::size_t resolution = 64;
    std::vector<std::string> samplers;
    fs::path out;
    std::uint64_t seed = 0;
    int workers = 1;
    bool no_wall_time = false;
    std::optional<fs::path> checkpoint;
};

struct GradcheckArgs {
    std::optional<fs::path> config;
    std::optional<fs::path> out;
    std::string inject_fault;
};

struct SummarizeBenchArgs {
    fs::path report;
    fs::path csv;
    fs::path json;
};

struct SummarizeTrainArgs {
    fs::path metrics;
    fs::path out;
    std::size_t window = 1;
};

// Each returns the process exit code; runtime failures propagate as exceptions.
int cmd_dataset(const DatasetArgs& a);
int cmd_train(const TrainArgs& a);
int cmd_render(const RenderArgs& a);
int cmd_fit(const FitArgs& a);
int cmd_bench(const BenchArgs& a);
int cmd_gradcheck(const GradcheckArgs& a);
int cmd_summarize_bench(const SummarizeBenchArgs& a);
int cmd_summarize_train(const SummarizeTrainArgs& a);

} // namespace rfcli

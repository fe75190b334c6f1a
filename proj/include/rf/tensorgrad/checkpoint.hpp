#pragma once

#include "rf/tensorgrad/tensor.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace rf::tg {

// "RFCK" container: magic, u32 format version, u32 metadata length, UTF-8 JSON
// metadata, then every tensor as little-endian f64 in metadata order.
// The metadata's "tensors" array ({name, shape}) is maintained by the codec.
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    nlohmann::json meta = nlohmann::json::object();
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor& get(const std::string& name) const;
    const Tensor* find(const std::string& name) const;
    void put(std::string name, Tensor t);
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Shared little-endian file helpers.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

} // namespace rf::tg

#include "rf/tensorgrad/checkpoint.hpp"

#include "rf/core/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace rf::tg {

namespace {

constexpr char kMagic[4] = {'R', 'F', 'C', 'K'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double d)
{
    const auto v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p)
{
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

double get_f64(const std::uint8_t* p)
{
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

} // namespace

const Tensor* Checkpoint::find(const std::string& name) const
{
    for (const auto& [n, t] : tensors)
        if (n == name) return &t;
    return nullptr;
}

const Tensor& Checkpoint::get(const std::string& name) const
{
    const Tensor* t = find(name);
    if (!t) throw FormatError("checkpoint has no tensor named '" + name + "'");
    return *t;
}

void Checkpoint::put(std::string name, Tensor t)
{
    for (auto& [n, existing] : tensors)
        if (n == name) {
            existing = std::move(t);
            return;
        }
    tensors.emplace_back(std::move(name), std::move(t));
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck)
{
    nlohmann::json meta = ck.meta;
    nlohmann::json list = nlohmann::json::array();
    for (const auto& [name, t] : ck.tensors) list.push_back({{"name", name}, {"shape", t.shape()}});
    meta["tensors"] = std::move(list);
    const std::string text = meta.dump();

    std::vector<std::uint8_t> out(kMagic, kMagic + 4);
    put_u32(out, Checkpoint::kVersion);
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    for (const auto& entry : ck.tensors)
        for (double v : entry.second.values()) put_f64(out, v);
    return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes)
{
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("not an RFCK checkpoint");
    const std::uint32_t version = get_u32(bytes.data() + 4);
    if (version != Checkpoint::kVersion) throw FormatError("unsupported RFCK version " + std::to_string(version));
    const std::uint32_t len = get_u32(bytes.data() + 8);
    if (12 + static_cast<std::size_t>(len) > bytes.size()) throw FormatError("truncated RFCK metadata");

    Checkpoint ck;
    try {
        ck.meta = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + len);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("RFCK metadata: ") + e.what());
    }
    std::size_t offset = 12 + len;
    for (const auto& entry : ck.meta.at("tensors")) {
        Shape shape = entry.at("shape").get<Shape>();
        const std::size_t n = shape_size(shape);
        if (offset + 8 * n > bytes.size()) throw FormatError("truncated RFCK tensor data");
        std::vector<double> data(n);
        for (std::size_t i = 0; i < n; ++i) data[i] = get_f64(bytes.data() + offset + 8 * i);
        offset += 8 * n;
        ck.tensors.emplace_back(entry.at("name").get<std::string>(), Tensor(std::move(shape), std::move(data)));
    }
    if (offset != bytes.size()) throw FormatError("trailing bytes after RFCK tensor data");
    ck.meta.erase("tensors");
    return ck;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck)
{
    write_file_bytes(path, encode_checkpoint(ck));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file_bytes(path)); }

} // namespace rf::tg

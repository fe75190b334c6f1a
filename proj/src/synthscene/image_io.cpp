#include "rf/synthscene/image_io.hpp"

#include "rf/core/error.hpp"
#include "rf/tensorgrad/checkpoint.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

namespace rf::synth {

namespace {

struct PngReadBuffer {
    const std::vector<std::uint8_t>* bytes;
    std::size_t offset;
};

void png_read_from_buffer(png_structp png, png_bytep out, png_size_t n)
{
    auto* buf = static_cast<PngReadBuffer*>(png_get_io_ptr(png));
    if (buf->offset + n > buf->bytes->size()) png_error(png, "truncated PNG stream");
    std::memcpy(out, buf->bytes->data() + buf->offset, n);
    buf->offset += n;
}

void png_write_to_vector(png_structp png, png_bytep data, png_size_t n)
{
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + n);
}

void png_flush_noop(png_structp) {}

void png_warn_silent(png_structp, png_const_charp) {}

} // namespace

std::vector<std::uint8_t> encode_png(const Image& img)
{
    if (img.width == 0 || img.height == 0 || img.rgb.size() != img.width * img.height * 3)
        throw InvalidArgument("encode_png: malformed image");
    std::vector<std::uint8_t> pixels(img.rgb.size());
    for (std::size_t i = 0; i < pixels.size(); ++i)
        pixels[i] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(img.rgb[i], 0.0, 1.0)));

    std::vector<std::uint8_t> out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warn_silent);
    if (!png) throw IoError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    // libpng reports errors by longjmp; no C++ objects are created past this point.
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encoding failed");
    }
    png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    for (std::size_t y = 0; y < img.height; ++y) png_write_row(png, pixels.data() + y * img.width * 3);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

Image decode_png(const std::vector<std::uint8_t>& bytes)
{
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw FormatError("not a PNG file");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warn_silent);
    if (!png) throw IoError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    PngReadBuffer buf{&bytes, 0};
    std::vector<std::uint8_t> pixels;
    png_uint_32 w = 0, h = 0;
    bool bad_layout = false;
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("corrupt PNG data");
    }
    png_set_read_fn(png, &buf, png_read_from_buffer);
    png_read_info(png, info);
    w = png_get_image_width(png, info);
    h = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (depth < 8) png_set_expand(png);
    png_read_update_info(png, info);
    if (png_get_rowbytes(png, info) != static_cast<png_size_t>(w) * 3) {
        bad_layout = true;
    } else {
        pixels.resize(static_cast<std::size_t>(w) * h * 3);
        for (png_uint_32 y = 0; y < h; ++y) png_read_row(png, pixels.data() + static_cast<std::size_t>(y) * w * 3, nullptr);
        png_read_end(png, nullptr);
    }
    png_destroy_read_struct(&png, &info, nullptr);
    if (bad_layout) throw FormatError("PNG: unsupported pixel layout");
    Image img(w, h);
    for (std::size_t i = 0; i < pixels.size(); ++i) img.rgb[i] = pixels[i] / 255.0;
    return img;
}

void write_png(const std::filesystem::path& path, const Image& img) { tg::write_file_bytes(path, encode_png(img)); }

Image read_png(const std::filesystem::path& path) { return decode_png(tg::read_file_bytes(path)); }

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p)
{
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

} // namespace

std::vector<std::uint8_t> encode_depth(const Map& depth)
{
    if (depth.values.size() != depth.width * depth.height) throw InvalidArgument("encode_depth: malformed map");
    std::vector<std::uint8_t> out{'R', 'F', 'D', '1'};
    out.reserve(12 + 4 * depth.values.size());
    put_u32(out, static_cast<std::uint32_t>(depth.width));
    put_u32(out, static_cast<std::uint32_t>(depth.height));
    for (double d : depth.values) {
        const float f = std::isinf(d) && d > 0 ? std::bit_cast<float>(0x7F800000u) : static_cast<float>(d);
        put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
    return out;
}

Map decode_depth(const std::vector<std::uint8_t>& bytes)
{
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RFD1", 4) != 0) throw FormatError("not an RFD1 depth file");
    Map m(get_u32(bytes.data() + 4), get_u32(bytes.data() + 8));
    if (bytes.size() != 12 + 4 * m.values.size()) throw FormatError("RFD1 size does not match its header");
    for (std::size_t i = 0; i < m.values.size(); ++i)
        m.values[i] = static_cast<double>(std::bit_cast<float>(get_u32(bytes.data() + 12 + 4 * i)));
    return m;
}

void write_depth(const std::filesystem::path& path, const Map& depth) { tg::write_file_bytes(path, encode_depth(depth)); }

Map read_depth(const std::filesystem::path& path) { return decode_depth(tg::read_file_bytes(path)); }

} // namespace rf::synth

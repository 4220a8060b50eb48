#pragma once

#include "error.hpp"
#include "render.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace polrecon {

// SVIM layout: "SVIM", u32 version, u32 width, u32 height, u32 channels, then
// width*height*channels float32, row-major from the top-left pixel. Per pixel:
// R s0..s3, G s0..s3, B s0..s3, mask (0/1), normal xyz, depth.
inline constexpr std::array<char, 4> kSvimMagic{'S', 'V', 'I', 'M'};
inline constexpr std::uint32_t kSvimVersion = 1;
inline constexpr std::uint32_t kSvimChannels = 17;
inline constexpr std::size_t kSvimHeaderBytes = 20;

namespace detail {

inline std::vector<char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open '" + path.string() + "' for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::vector<char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot open '" + path.string() + "' for writing");
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) fail(ErrorKind::io, "write failed for '" + path.string() + "'");
}

template <typename T>
void put(std::vector<char>& buf, T value) {
    const auto* p = reinterpret_cast<const char*>(&value);
    buf.insert(buf.end(), p, p + sizeof(T));
}

template <typename T>
T get(const std::vector<char>& buf, std::size_t offset) {
    T value;
    std::memcpy(&value, buf.data() + offset, sizeof(T));
    return value;
}

} // namespace detail

inline std::vector<char> encode_svim(const StokesImage& img) {
    std::vector<char> buf;
    buf.reserve(kSvimHeaderBytes + img.pixels.size() * kSvimChannels * 4);
    buf.insert(buf.end(), kSvimMagic.begin(), kSvimMagic.end());
    detail::put<std::uint32_t>(buf, kSvimVersion);
    detail::put<std::uint32_t>(buf, std::uint32_t(img.width));
    detail::put<std::uint32_t>(buf, std::uint32_t(img.height));
    detail::put<std::uint32_t>(buf, kSvimChannels);
    for (const PixelRecord& p : img.pixels) {
        for (int c = 0; c < 3; ++c)
            for (int k = 0; k < 4; ++k) detail::put<float>(buf, float(p.stokes[c][k]));
        detail::put<float>(buf, p.hit ? 1.0f : 0.0f);
        for (int k = 0; k < 3; ++k) detail::put<float>(buf, float(p.normal[k]));
        detail::put<float>(buf, float(p.depth));
    }
    return buf;
}

inline StokesImage decode_svim(const std::vector<char>& buf) {
    if (buf.size() < kSvimHeaderBytes)
        throw FormatError(buf.size(), "truncated header: expected " + std::to_string(kSvimHeaderBytes) +
                                          " bytes, got " + std::to_string(buf.size()));
    if (!std::equal(kSvimMagic.begin(), kSvimMagic.end(), buf.begin())) throw FormatError(0, "bad magic, not an SVIM file");
    if (detail::get<std::uint32_t>(buf, 4) != kSvimVersion) throw FormatError(4, "unsupported SVIM version");
    const auto w = detail::get<std::uint32_t>(buf, 8);
    const auto h = detail::get<std::uint32_t>(buf, 12);
    if (detail::get<std::uint32_t>(buf, 16) != kSvimChannels) throw FormatError(16, "channel count must be 17");
    const std::uint64_t expected = kSvimHeaderBytes + std::uint64_t(w) * h * kSvimChannels * 4;
    if (buf.size() != expected)
        throw FormatError(std::min<std::uint64_t>(buf.size(), expected),
                          "payload size mismatch: expected " + std::to_string(expected) + " bytes, got " +
                              std::to_string(buf.size()));

    StokesImage img{int(w), int(h)};
    std::size_t off = kSvimHeaderBytes;
    auto next = [&] {
        const float f = detail::get<float>(buf, off);
        if (!std::isfinite(f)) throw FormatError(off, "non-finite float");
        off += 4;
        return double(f);
    };
    for (PixelRecord& p : img.pixels) {
        for (int c = 0; c < 3; ++c)
            for (int k = 0; k < 4; ++k) p.stokes[c][k] = next();
        const std::size_t mask_off = off;
        const double mask = next();
        if (mask != 0.0 && mask != 1.0) throw FormatError(mask_off, "mask must be 0 or 1");
        p.hit = mask == 1.0;
        for (int k = 0; k < 3; ++k) p.normal[k] = next();
        p.depth = next();
    }
    return img;
}

inline void write_stokes_image(const std::filesystem::path& path, const StokesImage& img) {
    detail::write_file(path, encode_svim(img));
}

inline StokesImage read_stokes_image(const std::filesystem::path& path) {
    return decode_svim(detail::read_file(path));
}

/// Dense float64 array in NumPy .npy v1.0 layout, C order.
struct NpyArray {
    std::vector<std::size_t> shape;
    std::vector<double> data;
};

inline void write_npy(const std::filesystem::path& path, const NpyArray& arr) {
    std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': (";
    for (std::size_t i = 0; i < arr.shape.size(); ++i) {
        header += std::to_string(arr.shape[i]);
        if (arr.shape.size() == 1 || i + 1 < arr.shape.size()) header += ",";
        if (i + 1 < arr.shape.size()) header += " ";
    }
    header += "), }";
    const std::size_t unpadded = 10 + header.size() + 1;
    header.append((64 - unpadded % 64) % 64, ' ');
    header += '\n';
    std::vector<char> buf{'\x93', 'N', 'U', 'M', 'P', 'Y', '\x01', '\x00'};
    detail::put<std::uint16_t>(buf, std::uint16_t(header.size()));
    buf.insert(buf.end(), header.begin(), header.end());
    for (double v : arr.data) detail::put<double>(buf, v);
    detail::write_file(path, buf);
}

inline NpyArray read_npy(const std::filesystem::path& path) {
    const std::vector<char> buf = detail::read_file(path);
    if (buf.size() < 10 || std::memcmp(buf.data(), "\x93NUMPY\x01\x00", 8) != 0)
        throw FormatError(0, "not a version 1.0 .npy file");
    const std::size_t hlen = detail::get<std::uint16_t>(buf, 8);
    if (buf.size() < 10 + hlen) throw FormatError(buf.size(), "truncated .npy header");
    const std::string header(buf.data() + 10, hlen);
    if (header.find("'<f8'") == std::string::npos) throw FormatError(10, ".npy dtype must be <f8");
    if (header.find("'fortran_order': False") == std::string::npos) throw FormatError(10, ".npy must be C order");
    const auto open = header.find('(', header.find("'shape'"));
    const auto close = header.find(')', open);
    if (open == std::string::npos || close == std::string::npos) throw FormatError(10, ".npy shape missing");
    NpyArray arr;
    std::size_t count = 1;
    std::string dims = header.substr(open + 1, close - open - 1);
    for (std::size_t pos = 0; pos < dims.size();) {
        const auto comma = dims.find(',', pos);
        const std::string tok = dims.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        if (tok.find_first_of("0123456789") != std::string::npos) {
            arr.shape.push_back(std::stoull(tok));
            count *= arr.shape.back();
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    const std::size_t offset = 10 + hlen;
    if (buf.size() != offset + count * 8)
        throw FormatError(buf.size(), "payload size mismatch: expected " + std::to_string(offset + count * 8) +
                                          " bytes, got " + std::to_string(buf.size()));
    arr.data.resize(count);
    std::memcpy(arr.data.data(), buf.data() + offset, count * 8);
    return arr;
}

inline NpyArray to_npy(const RGBImage& img) {
    NpyArray arr{{std::size_t(img.height), std::size_t(img.width), 3}, {}};
    arr.data.reserve(img.pixels.size() * 3);
    for (const RGB& p : img.pixels) arr.data.insert(arr.data.end(), p.begin(), p.end());
    return arr;
}

inline RGBImage rgb_from_npy(const NpyArray& arr) {
    if (arr.shape.size() != 3 || arr.shape[2] != 3) fail(ErrorKind::format, "expected an (H, W, 3) array");
    RGBImage img(int(arr.shape[1]), int(arr.shape[0]));
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        for (int c = 0; c < 3; ++c) img.pixels[i][c] = arr.data[i * 3 + c];
    return img;
}

inline double srgb_encode(double linear) {
    const double x = std::clamp(linear, 0.0, 1.0);
    return x <= 0.0031308 ? 12.92 * x : 1.055 * std::pow(x, 1.0 / 2.4) - 0.055;
}

/// 8-bit sRGB PNG. `channels` is 1 (gray) or 3 (RGB); values are linear in [0, 1].
inline void write_png(const std::filesystem::path& path, int width, int height, int channels,
                      const std::vector<double>& linear) {
    std::vector<png_byte> bytes(linear.size());
    for (std::size_t i = 0; i < linear.size(); ++i)
        bytes[i] = png_byte(std::lround(255.0 * srgb_encode(linear[i])));

    std::FILE* fp = std::fopen(path.string().c_str(), "wb");
    if (!fp) fail(ErrorKind::io, "cannot open '" + path.string() + "' for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        fail(ErrorKind::io, "PNG encoding failed for '" + path.string() + "'");
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, png_uint_32(width), png_uint_32(height), 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_sRGB(png, info, PNG_sRGB_INTENT_PERCEPTUAL);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y) png_write_row(png, bytes.data() + std::size_t(y) * width * channels);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

inline void write_png(const std::filesystem::path& path, const RGBImage& img) {
    std::vector<double> flat;
    flat.reserve(img.pixels.size() * 3);
    for (const RGB& p : img.pixels) flat.insert(flat.end(), p.begin(), p.end());
    write_png(path, img.width, img.height, 3, flat);
}

} // namespace polrecon

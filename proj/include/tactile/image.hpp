#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "tactile/error.hpp"

namespace tactile {

/// 8-bit grayscale raster, row-major. 0 is a dark dot core, 255 background.
struct GelImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    GelImage() = default;
    GelImage(int w, int h, std::uint8_t fill = 255)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }

    bool well_formed() const noexcept {
        return width >= 0 && height >= 0 &&
               pixels.size() == static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }

    friend bool operator==(const GelImage&, const GelImage&) = default;
};

/// Binary PGM (P5, maxval 255).
inline std::vector<std::uint8_t> encode_pgm(const GelImage& img) {
    const std::string header =
        "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.pixels.begin(), img.pixels.end());
    return out;
}

inline GelImage decode_pgm(std::span<const std::uint8_t> bytes) {
    std::size_t pos = 0;
    auto skip_space = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_int = [&] {
        skip_space();
        long v = 0;
        std::size_t start = pos;
        while (pos < bytes.size() && std::isdigit(bytes[pos]) && v < 1'000'000) v = v * 10 + (bytes[pos++] - '0');
        if (pos == start) throw Error(Errc::parse_error, "malformed PGM header");
        return v;
    };
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw Error(Errc::parse_error, "not a binary PGM (P5)");
    pos = 2;
    const long w = read_int();
    const long h = read_int();
    const long maxval = read_int();
    if (maxval != 255) throw Error(Errc::parse_error, "only maxval 255 is supported");
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw Error(Errc::parse_error, "malformed PGM header");
    ++pos;
    const auto n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    if (bytes.size() - pos < n) throw Error(Errc::parse_error, "truncated PGM raster");
    GelImage img(static_cast<int>(w), static_cast<int>(h));
    std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(pos), n, img.pixels.begin());
    return img;
}

inline void write_pgm(const std::filesystem::path& path, const GelImage& img) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(Errc::io_error, "cannot open " + path.string());
    const auto bytes = encode_pgm(img);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error(Errc::io_error, "write failed: " + path.string());
}

inline GelImage read_pgm(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(Errc::io_error, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_pgm(bytes);
}

}  // namespace tactile

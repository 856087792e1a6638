#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>

#include "osagdo/core.hpp"
#include "osagdo/error.hpp"

namespace osagdo {

// Binary PPM (P6, 8-bit RGB) and PGM (P5, 16-bit grayscale) are the
// raster formats this toolkit reads and writes. Heatmaps are stored as
// 16-bit PGM scaled so that value 1.0 maps to 65535.

namespace detail {
inline int read_pnm_int(std::istream& is) {
    int c = is.get();
    while (c == '#' || std::isspace(c)) {
        if (c == '#')
            while (c != '\n' && c != EOF) c = is.get();
        c = is.get();
    }
    int v = 0;
    bool any = false;
    while (std::isdigit(c)) {
        v = v * 10 + (c - '0');
        any = true;
        c = is.get();
    }
    if (!any) throw IoError("malformed PNM header");
    return v;
}
}  // namespace detail

inline void write_ppm(const std::string& path, const Image& img) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << "P6\n" << img.width << " " << img.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.pixels.data()),
             static_cast<std::streamsize>(img.pixels.size()));
    if (!os) throw IoError("write failed: " + path);
}

inline Image read_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    char m0 = 0, m1 = 0;
    is.get(m0), is.get(m1);
    if (m0 != 'P' || m1 != '6') throw IoError("not a binary PPM (P6): " + path);
    const int w = detail::read_pnm_int(is);
    const int h = detail::read_pnm_int(is);
    const int maxval = detail::read_pnm_int(is);
    if (maxval != 255) throw IoError("unsupported PPM maxval in " + path);
    Image img(h, w);
    is.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (!is) throw IoError("truncated PPM: " + path);
    return img;
}

/// Writes a heatmap as 16-bit PGM; values are clamped to [0, scale]
/// then mapped onto the full 16-bit range.
inline void write_pgm16(const std::string& path, const Heatmap& h, double scale = 1.0) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << "P5\n" << h.width << " " << h.height << "\n65535\n";
    for (double v : h.values) {
        double x = v / scale;
        if (x < 0) x = 0;
        if (x > 1) x = 1;
        const auto u = static_cast<std::uint16_t>(x * 65535.0 + 0.5);
        os.put(static_cast<char>(u >> 8));
        os.put(static_cast<char>(u & 0xff));
    }
    if (!os) throw IoError("write failed: " + path);
}

inline Heatmap read_pgm16(const std::string& path, double scale = 1.0) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    char m0 = 0, m1 = 0;
    is.get(m0), is.get(m1);
    if (m0 != 'P' || m1 != '5') throw IoError("not a binary PGM (P5): " + path);
    const int w = detail::read_pnm_int(is);
    const int h = detail::read_pnm_int(is);
    const int maxval = detail::read_pnm_int(is);
    if (maxval != 65535) throw IoError("expected 16-bit PGM in " + path);
    Heatmap map(h, w, MapKind::Probability);
    for (auto& v : map.values) {
        const int hi = is.get(), lo = is.get();
        if (lo == EOF) throw IoError("truncated PGM: " + path);
        v = scale * ((hi << 8) | lo) / 65535.0;
    }
    return map;
}

/// Reads just the (height, width) of a PNM file.
inline std::pair<int, int> read_pnm_size(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    char m0 = 0, m1 = 0;
    is.get(m0), is.get(m1);
    if (m0 != 'P' || (m1 != '5' && m1 != '6')) throw IoError("not a PNM file: " + path);
    const int w = detail::read_pnm_int(is);
    const int h = detail::read_pnm_int(is);
    return {h, w};
}

/// Loads either PPM or PGM (grayscale replicated to RGB) by magic.
inline Image read_image(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw IoError("cannot open: " + path);
    char m0 = 0, m1 = 0;
    probe.get(m0), probe.get(m1);
    probe.close();
    if (m0 == 'P' && m1 == '6') return read_ppm(path);
    if (m0 == 'P' && m1 == '5') {
        const Heatmap h = read_pgm16(path);
        Image img(h.height, h.width);
        for (int y = 0; y < h.height; ++y)
            for (int x = 0; x < h.width; ++x) {
                const auto v = static_cast<std::uint8_t>(h.at(y, x) * 255.0 + 0.5);
                img.at(y, x, 0) = img.at(y, x, 1) = img.at(y, x, 2) = v;
            }
        return img;
    }
    throw IoError("unsupported image format (expect P5/P6 PNM): " + path);
}

/// Jet-style colormap overlay of a probability map on an image,
/// alpha-blended at 0.5.
inline Image render_overlay(const Image& img, const Heatmap& map) {
    Heatmap m = (map.height == img.height && map.width == img.width)
                    ? map
                    : resample(map, img.height, img.width);
    Image out = img;
    auto jet = [](double v, int c) {
        // piecewise-linear jet approximation, v in [0,1]
        const double r = std::clamp(1.5 - std::abs(4 * v - 3), 0.0, 1.0);
        const double g = std::clamp(1.5 - std::abs(4 * v - 2), 0.0, 1.0);
        const double b = std::clamp(1.5 - std::abs(4 * v - 1), 0.0, 1.0);
        return c == 0 ? r : (c == 1 ? g : b);
    };
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
            const double v = std::clamp(m.at(y, x), 0.0, 1.0);
            for (int c = 0; c < 3; ++c) {
                const double blended = 0.5 * out.at(y, x, c) + 0.5 * 255.0 * jet(v, c);
                out.at(y, x, c) = static_cast<std::uint8_t>(blended + 0.5);
            }
        }
    return out;
}

}  // namespace osagdo

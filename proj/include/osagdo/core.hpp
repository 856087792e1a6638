#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "osagdo/error.hpp"

namespace osagdo {

/// RGB raster, 8 bits per channel, row-major, interleaved channels.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> pixels;  // height*width*3

    Image() = default;
    Image(int h, int w) : height(h), width(w), pixels(static_cast<size_t>(h) * w * 3, 0) {
        if (h < 32 || w < 32) throw ShapeError("Image must be at least 32x32");
    }

    std::uint8_t& at(int y, int x, int c) {
        return pixels[(static_cast<size_t>(y) * width + x) * 3 + c];
    }
    std::uint8_t at(int y, int x, int c) const {
        return pixels[(static_cast<size_t>(y) * width + x) * 3 + c];
    }
};

enum class MapKind { Probability, Weight };

/// Dense H x W map. Probability maps live in [0,1], weight maps in [1,2].
struct Heatmap {
    int height = 0;
    int width = 0;
    MapKind kind = MapKind::Probability;
    std::vector<double> values;  // height*width, row-major

    Heatmap() = default;
    Heatmap(int h, int w, MapKind k = MapKind::Probability)
        : height(h), width(w), kind(k), values(static_cast<size_t>(h) * w, 0.0) {}

    double& at(int y, int x) { return values[static_cast<size_t>(y) * width + x]; }
    double at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }

    double max_value() const {
        double m = -1e300;
        for (double v : values) m = std::max(m, v);
        return m;
    }
    double min_value() const {
        double m = 1e300;
        for (double v : values) m = std::min(m, v);
        return m;
    }
};

/// L x C patch features with their (h, w) patch grid, L = h*w.
/// Patch ordering is row-major: left-to-right, top-to-bottom.
struct FeatureMap {
    int rows = 0;      // L
    int channels = 0;  // C
    int grid_h = 0;
    int grid_w = 0;
    std::vector<double> values;  // rows*channels, row-major

    FeatureMap() = default;
    FeatureMap(int grid_h_, int grid_w_, int channels_)
        : rows(grid_h_ * grid_w_),
          channels(channels_),
          grid_h(grid_h_),
          grid_w(grid_w_),
          values(static_cast<size_t>(grid_h_) * grid_w_ * channels_, 0.0) {}

    double& at(int row, int c) { return values[static_cast<size_t>(row) * channels + c]; }
    double at(int row, int c) const { return values[static_cast<size_t>(row) * channels + c]; }

    void check() const {
        if (rows != grid_h * grid_w)
            throw ShapeError("FeatureMap: L != h*w (" + std::to_string(rows) + " vs " +
                             std::to_string(grid_h) + "x" + std::to_string(grid_w) + ")");
        if (values.size() != static_cast<size_t>(rows) * channels)
            throw ShapeError("FeatureMap: value buffer size mismatch");
    }
};

/// One of the schema's closed set of affordance names.
struct AffordanceLabel {
    int id = 0;
    std::string name;  // verb+noun, e.g. "grasp_hem"
};

/// Row-major reshape of L x C features to an h x w x C grid.
/// Returned buffer is indexed [(y*w + x)*C + c], i.e. the same bytes —
/// this is a checked view materialization, inverse of from_grid.
inline std::vector<double> to_grid(const FeatureMap& f) {
    f.check();
    return f.values;
}

/// Rebuilds a FeatureMap from a grid buffer.
inline FeatureMap from_grid(const std::vector<double>& grid, int h, int w, int channels) {
    if (grid.size() != static_cast<size_t>(h) * w * channels)
        throw ShapeError("from_grid: buffer size does not match h*w*C");
    FeatureMap f(h, w, channels);
    f.values = grid;
    return f;
}

/// Bilinear resample with corner-aligned sampling. Constant maps stay
/// constant and output values never leave the input [min, max] range.
inline Heatmap resample(const Heatmap& h, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw ShapeError("resample: output size must be >= 1");
    if (out_h == h.height && out_w == h.width) return h;
    Heatmap out(out_h, out_w, h.kind);
    const double sy = out_h > 1 ? static_cast<double>(h.height - 1) / (out_h - 1) : 0.0;
    const double sx = out_w > 1 ? static_cast<double>(h.width - 1) / (out_w - 1) : 0.0;
    for (int y = 0; y < out_h; ++y) {
        const double fy = out_h > 1 ? y * sy : (h.height - 1) * 0.5;
        const int y0 = std::min(static_cast<int>(fy), h.height - 1);
        const int y1 = std::min(y0 + 1, h.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            const double fx = out_w > 1 ? x * sx : (h.width - 1) * 0.5;
            const int x0 = std::min(static_cast<int>(fx), h.width - 1);
            const int x1 = std::min(x0 + 1, h.width - 1);
            const double wx = fx - x0;
            out.at(y, x) = (1 - wy) * ((1 - wx) * h.at(y0, x0) + wx * h.at(y0, x1)) +
                           wy * ((1 - wx) * h.at(y1, x0) + wx * h.at(y1, x1));
        }
    }
    return out;
}

/// ITU-R 601 luma; pixel values scaled to [0, 255] doubles.
inline std::vector<double> to_grayscale(const Image& img) {
    std::vector<double> g(static_cast<size_t>(img.height) * img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            g[static_cast<size_t>(y) * img.width + x] =
                0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
    return g;
}

}  // namespace osagdo

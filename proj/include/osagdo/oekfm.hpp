#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "osagdo/core.hpp"

namespace osagdo {

struct Keypoint {
    double x = 0, y = 0;
    double score = 0;  // Harris response
};

struct OEKFMConfig {
    int n_features = 400;
    double sigma_px = 8.0;     // Gaussian radius at 224 resolution
    double epsilon = 1e-8;     // range-normalization guard
    double fast_threshold = 20.0;  // intensity delta on the 0..255 scale
};

namespace detail {

// Offsets of the 16-pixel Bresenham circle of radius 3 used by FAST.
inline constexpr int kFastCircle[16][2] = {
    {0, -3}, {1, -3}, {2, -2}, {3, -1}, {3, 0}, {3, 1}, {2, 2}, {1, 3},
    {0, 3}, {-1, 3}, {-2, 2}, {-3, 1}, {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3}};

/// FAST segment test: 9 contiguous circle pixels all brighter than
/// center+t or all darker than center-t.
inline bool fast9(const std::vector<double>& g, int W, int x, int y, double t) {
    const double c = g[static_cast<size_t>(y) * W + x];
    unsigned brighter = 0, darker = 0;
    for (int i = 0; i < 16; ++i) {
        const double v = g[static_cast<size_t>(y + kFastCircle[i][1]) * W + x + kFastCircle[i][0]];
        if (v > c + t) brighter |= 1u << i;
        if (v < c - t) darker |= 1u << i;
    }
    auto has_arc9 = [](unsigned mask) {
        const unsigned wrapped = mask | (mask << 16);
        unsigned run = 0;
        for (int i = 0; i < 32; ++i) {
            run = (wrapped >> i) & 1u ? run + 1 : 0;
            if (run >= 9) return true;
        }
        return false;
    };
    return has_arc9(brighter) || has_arc9(darker);
}

/// Harris response at (x,y): Sobel gradients accumulated over a 3x3
/// window, R = det(M) - 0.04 tr(M)^2.
inline double harris(const std::vector<double>& g, int W, int H, int x, int y) {
    double sxx = 0, syy = 0, sxy = 0;
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
            const int px = x + dx, py = y + dy;
            if (px < 1 || px >= W - 1 || py < 1 || py >= H - 1) continue;
            auto at = [&](int yy, int xx) { return g[static_cast<size_t>(yy) * W + xx]; };
            const double ix = (at(py - 1, px + 1) + 2 * at(py, px + 1) + at(py + 1, px + 1)) -
                              (at(py - 1, px - 1) + 2 * at(py, px - 1) + at(py + 1, px - 1));
            const double iy = (at(py + 1, px - 1) + 2 * at(py + 1, px) + at(py + 1, px + 1)) -
                              (at(py - 1, px - 1) + 2 * at(py - 1, px) + at(py - 1, px + 1));
            sxx += ix * ix;
            syy += iy * iy;
            sxy += ix * iy;
        }
    return sxx * syy - sxy * sxy - 0.04 * (sxx + syy) * (sxx + syy);
}

}  // namespace detail

/// ORB-style detection: FAST-9 candidates ranked by Harris response,
/// truncated to cfg.n_features. Deterministic: ties broken by (y,x).
inline std::vector<Keypoint> detect_keypoints(const Image& img, const OEKFMConfig& cfg) {
    const auto gray = to_grayscale(img);
    const int W = img.width, H = img.height;
    std::vector<Keypoint> kps;
    for (int y = 3; y < H - 3; ++y)
        for (int x = 3; x < W - 3; ++x)
            if (detail::fast9(gray, W, x, y, cfg.fast_threshold))
                kps.push_back({static_cast<double>(x), static_cast<double>(y),
                               detail::harris(gray, W, H, x, y)});
    std::sort(kps.begin(), kps.end(), [](const Keypoint& a, const Keypoint& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    });
    if (static_cast<int>(kps.size()) > cfg.n_features) kps.resize(cfg.n_features);
    return kps;
}

/// Detector plug point; downstream code relies only on the contract
/// (deterministic, scored, truncated to n_features).
using KeypointDetector = std::vector<Keypoint> (*)(const Image&, const OEKFMConfig&);

/// Sum of unit-peak Gaussians centered on the keypoints; empty list
/// gives the all-zero map.
inline Heatmap region_map(const std::vector<Keypoint>& kps, int H, int W, const OEKFMConfig& cfg) {
    Heatmap m(H, W, MapKind::Probability);
    const double inv = 1.0 / (2.0 * cfg.sigma_px * cfg.sigma_px);
    for (const auto& kp : kps)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const double dx = x - kp.x, dy = y - kp.y;
                m.at(y, x) += std::exp(-(dx * dx + dy * dy) * inv);
            }
    return m;
}

/// Rescales the raw region map into a multiplicative weight map:
/// M' = 1 + (M - min) / (max - min + eps), so the range is [1, 2).
/// A constant map maps to exactly 1 everywhere.
inline Heatmap normalize_region(const Heatmap& m, const OEKFMConfig& cfg) {
    Heatmap out(m.height, m.width, MapKind::Weight);
    const double lo = m.min_value(), hi = m.max_value();
    const double denom = hi - lo + cfg.epsilon;
    for (size_t i = 0; i < m.values.size(); ++i) out.values[i] = 1.0 + (m.values[i] - lo) / denom;
    return out;
}

/// Final fusion: P = clamp(F_pred * M', 0, 1).
inline Heatmap fuse(const Heatmap& f_pred, const Heatmap& m_prime) {
    if (f_pred.height != m_prime.height || f_pred.width != m_prime.width)
        throw ShapeError("fuse: prediction and weight map sizes differ");
    Heatmap out(f_pred.height, f_pred.width, MapKind::Probability);
    for (size_t i = 0; i < out.values.size(); ++i) {
        const double p = f_pred.values[i] * m_prime.values[i];
        out.values[i] = p < 0.0 ? 0.0 : (p > 1.0 ? 1.0 : p);
    }
    return out;
}

}  // namespace osagdo

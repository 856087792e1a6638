#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "osagdo/autodiff.hpp"
#include "osagdo/core.hpp"
#include "osagdo/rng.hpp"

namespace osagdo {

/// Adaptive average pooling of a dense map to an (h x w) grid
/// (PyTorch-style bin boundaries).
inline std::vector<double> adaptive_avg_pool(const Heatmap& m, int h, int w) {
    std::vector<double> out(static_cast<size_t>(h) * w, 0.0);
    for (int gy = 0; gy < h; ++gy) {
        const int y0 = gy * m.height / h;
        const int y1 = (gy + 1) * m.height / h + ((gy + 1) * m.height % h != 0 ? 1 : 0);
        for (int gx = 0; gx < w; ++gx) {
            const int x0 = gx * m.width / w;
            const int x1 = (gx + 1) * m.width / w + ((gx + 1) * m.width % w != 0 ? 1 : 0);
            double s = 0;
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) s += m.at(y, x);
            out[gy * w + gx] = s / ((y1 - y0) * (x1 - x0));
        }
    }
    return out;
}

/// Deformable-object semantic enhancement: a 1x1-adjusted copy of the
/// patch features is modulated by a per-channel gate (conditioned on a
/// pooled label map) and a per-position spatial gate,
/// out = adjusted * (0.5 + W_c) * (0.5 + W_s).
struct DefoSEMParams {
    int C = 0;
    int grid_h = 0, grid_w = 0;
    bool channel_gate_on = true;
    bool spatial_gate_on = true;

    ad::Param w_align, b_align;    // 1x1 conv, label channel -> C
    ad::Param w_adjust, b_adjust;  // 1x1 conv, C -> C
    ad::Param k_spatial, b_spatial;  // 3x3 conv, C -> 1
    ad::Param w_channel, b_channel;  // 1x1 conv, 2C -> C
    ad::Param default_label;         // h*w x 1, used when no label is supplied

    DefoSEMParams() = default;
    DefoSEMParams(int C_, int h, int w, Rng& rng) : C(C_), grid_h(h), grid_w(w) {
        auto uniform_fan_in = [&rng](ad::Param& p, const std::string& name, int rows, int cols,
                                     int fan_in) {
            p.name = "defosem." + name;
            p.rows = rows;
            p.cols = cols;
            p.values.resize(static_cast<size_t>(rows) * cols);
            const double b = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (auto& v : p.values) v = rng.uniform(-b, b);
        };
        auto zeros = [](ad::Param& p, const std::string& name, int rows, int cols) {
            p.name = "defosem." + name;
            p.rows = rows;
            p.cols = cols;
            p.values.assign(static_cast<size_t>(rows) * cols, 0.0);
        };
        uniform_fan_in(w_align, "w_align", 1, C, 1);
        zeros(b_align, "b_align", 1, C);
        uniform_fan_in(w_adjust, "w_adjust", C, C, C);
        zeros(b_adjust, "b_adjust", 1, C);
        uniform_fan_in(k_spatial, "k_spatial", 1, 9 * C, 9 * C);
        zeros(b_spatial, "b_spatial", 1, 1);
        uniform_fan_in(w_channel, "w_channel", 2 * C, C, 2 * C);
        zeros(b_channel, "b_channel", 1, C);
        default_label.name = "defosem.default_label";
        default_label.rows = h * w;
        default_label.cols = 1;
        default_label.values.assign(static_cast<size_t>(h) * w, 0.5);
    }

    template <class F>
    void for_each_param(F f) {
        f(w_align), f(b_align), f(w_adjust), f(b_adjust), f(k_spatial), f(b_spatial),
            f(w_channel), f(b_channel), f(default_label);
    }
};

struct DefoSEMForward {
    ad::Tape::Var out;        // L x C enhanced features
    ad::Tape::Var adjusted;   // L x C, the pre-gate 1x1-adjusted features
    ad::Tape::Var w_channel;  // 1 x C gate
    ad::Tape::Var w_spatial;  // L x 1 gate
};

using ParamBinding = std::vector<std::pair<ad::Param*, ad::Tape::Var>>;

inline ad::Tape::Var bind(ad::Tape& t, ad::Param& p, ParamBinding* bound) {
    auto v = t.variable(p.rows, p.cols, p.values);
    if (bound) bound->emplace_back(&p, v);
    return v;
}

/// Tape-level forward. pooled_label is the label map already pooled to
/// the patch grid (length h*w), or nullptr to use the trainable default.
inline DefoSEMForward defosem_forward(ad::Tape& t, ad::Tape::Var f,
                                      const std::vector<double>* pooled_label, DefoSEMParams& p,
                                      ParamBinding* bound = nullptr) {
    const int L = p.grid_h * p.grid_w;
    if (t.rows(f) != L || t.cols(f) != p.C)
        throw ShapeError("defosem: feature grid does not match parameters");
    if (pooled_label && static_cast<int>(pooled_label->size()) != L)
        throw ShapeError("defosem: pooled label size does not match patch grid");

    auto w_align = bind(t, p.w_align, bound);
    auto b_align = bind(t, p.b_align, bound);
    auto w_adjust = bind(t, p.w_adjust, bound);
    auto b_adjust = bind(t, p.b_adjust, bound);
    auto k_spatial = bind(t, p.k_spatial, bound);
    auto b_spatial = bind(t, p.b_spatial, bound);
    auto w_channel = bind(t, p.w_channel, bound);
    auto b_channel = bind(t, p.b_channel, bound);
    auto default_label = bind(t, p.default_label, bound);

    auto label_col =
        pooled_label ? t.constant(L, 1, *pooled_label) : default_label;
    auto label_aligned = t.add_rowvec(t.matmul(label_col, w_align), b_align);  // L x C
    auto adjusted = t.add_rowvec(t.matmul(f, w_adjust), b_adjust);            // L x C

    auto w_s = t.sigmoid(t.conv3x3(adjusted, k_spatial, b_spatial, p.grid_h, p.grid_w));  // L x 1
    auto cat = t.concat_cols(adjusted, label_aligned);                                    // L x 2C
    auto w_c = t.sigmoid(t.mean_rows(t.add_rowvec(t.matmul(cat, w_channel), b_channel)));  // 1 x C

    auto out = adjusted;
    if (p.channel_gate_on) out = t.mul_rowvec(out, t.add_scalar(w_c, 0.5));
    if (p.spatial_gate_on) out = t.mul_colvec(out, t.add_scalar(w_s, 0.5));
    return {out, adjusted, w_c, w_s};
}

/// Value-level enhance. label may be null (default-label path).
inline FeatureMap enhance(const FeatureMap& f, const Heatmap* label, DefoSEMParams& p) {
    f.check();
    ad::Tape t;
    auto fv = t.constant(f.rows, f.channels, f.values);
    std::vector<double> pooled;
    if (label) {
        if (label->kind != MapKind::Probability)
            throw ValidationError("defosem: label must be a probability map");
        pooled = adaptive_avg_pool(*label, p.grid_h, p.grid_w);
    }
    auto fwd = defosem_forward(t, fv, label ? &pooled : nullptr, p);
    FeatureMap out(p.grid_h, p.grid_w, p.C);
    out.values = t.value(fwd.out);
    return out;
}

/// Diagnostic accessor: the channel gate (C values) and spatial gate
/// (h*w values); every element is strictly inside (0,1).
inline std::pair<std::vector<double>, std::vector<double>> gate_ranges(DefoSEMParams& p,
                                                                       const FeatureMap& f,
                                                                       const Heatmap* label) {
    ad::Tape t;
    auto fv = t.constant(f.rows, f.channels, f.values);
    std::vector<double> pooled;
    if (label) pooled = adaptive_avg_pool(*label, p.grid_h, p.grid_w);
    auto fwd = defosem_forward(t, fv, label ? &pooled : nullptr, p);
    return {t.value(fwd.w_channel), t.value(fwd.w_spatial)};
}

}  // namespace osagdo

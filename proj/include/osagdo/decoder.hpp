#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "osagdo/autodiff.hpp"
#include "osagdo/core.hpp"
#include "osagdo/defosem.hpp"  // ParamBinding / bind
#include "osagdo/encoders.hpp"
#include "osagdo/rng.hpp"

namespace osagdo {

/// CLS-guided transformer decoder. Text embeddings become queries,
/// FiLM-modulated by the global token, then D blocks of cross-attention
/// over the patch features; the readout is a sharpened query/patch
/// cosine map per affordance.
struct DecoderParams {
    int depth = 2;
    int C = 0;    // feature width
    int C_t = 0;  // text embedding width
    double out_temperature = 10.0;  // readout sharpness s
    bool cls_modulation_on = true;

    struct Block {
        ad::Param w_q, w_k, w_v, w_o;    // C x C each
        ad::Param ffn_w1, ffn_b1;        // C -> 4C
        ad::Param ffn_w2, ffn_b2;        // 4C -> C
    };

    ad::Param text_proj, text_bias;  // C_t -> C
    ad::Param cls_mod_w, cls_mod_b;  // C -> 2C (gamma, beta)
    std::vector<Block> blocks;

    DecoderParams() = default;
    DecoderParams(int depth_, int C_, int C_t_, Rng& rng) : depth(depth_), C(C_), C_t(C_t_) {
        if (depth_ < 0) throw ShapeError("DecoderParams: depth must be >= 0");
        auto uniform_fan_in = [&rng](ad::Param& p, const std::string& name, int rows, int cols,
                                     int fan_in) {
            p.name = "decoder." + name;
            p.rows = rows;
            p.cols = cols;
            p.values.resize(static_cast<size_t>(rows) * cols);
            const double b = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (auto& v : p.values) v = rng.uniform(-b, b);
        };
        auto zeros = [](ad::Param& p, const std::string& name, int rows, int cols) {
            p.name = "decoder." + name;
            p.rows = rows;
            p.cols = cols;
            p.values.assign(static_cast<size_t>(rows) * cols, 0.0);
        };
        // identity-leaning init: queries start as (projected) text rows
        uniform_fan_in(text_proj, "text_proj", C_t, C, C_t);
        if (C_t == C)
            for (int i = 0; i < C; ++i) text_proj.values[static_cast<size_t>(i) * C + i] += 1.0;
        zeros(text_bias, "text_bias", 1, C);
        uniform_fan_in(cls_mod_w, "cls_mod_w", C, 2 * C, C);
        zeros(cls_mod_b, "cls_mod_b", 1, 2 * C);
        blocks.resize(depth_);
        for (int d = 0; d < depth_; ++d) {
            const std::string pre = "block" + std::to_string(d) + ".";
            uniform_fan_in(blocks[d].w_q, pre + "w_q", C, C, C);
            uniform_fan_in(blocks[d].w_k, pre + "w_k", C, C, C);
            uniform_fan_in(blocks[d].w_v, pre + "w_v", C, C, C);
            // residual branches start at zero so each block begins as the
            // identity and learns its contribution
            zeros(blocks[d].w_o, pre + "w_o", C, C);
            uniform_fan_in(blocks[d].ffn_w1, pre + "ffn_w1", C, 4 * C, C);
            zeros(blocks[d].ffn_b1, pre + "ffn_b1", 1, 4 * C);
            zeros(blocks[d].ffn_w2, pre + "ffn_w2", 4 * C, C);
            zeros(blocks[d].ffn_b2, pre + "ffn_b2", 1, C);
        }
    }

    template <class F>
    void for_each_param(F f) {
        f(text_proj), f(text_bias), f(cls_mod_w), f(cls_mod_b);
        for (auto& b : blocks) {
            f(b.w_q), f(b.w_k), f(b.w_v), f(b.w_o);
            f(b.ffn_w1), f(b.ffn_b1), f(b.ffn_w2), f(b.ffn_b2);
        }
    }
};

struct DecoderForward {
    ad::Tape::Var queries;    // N x C final queries
    ad::Tape::Var grid_maps;  // N x L sigmoid maps at patch resolution
};

/// Tape-level decode up to patch resolution. f_enhanced: L x C,
/// f_text: N x C_t, cls: 1 x C.
inline DecoderForward decode_tape(ad::Tape& t, ad::Tape::Var f_enhanced, ad::Tape::Var f_text,
                                  ad::Tape::Var cls, DecoderParams& p,
                                  ParamBinding* bound = nullptr) {
    if (t.cols(f_enhanced) != p.C) throw ShapeError("decode: feature width != C");
    if (t.cols(f_text) != p.C_t) throw ShapeError("decode: text width != C_t");
    if (t.rows(cls) != 1 || t.cols(cls) != p.C) throw ShapeError("decode: cls width != C");

    auto w_t = bind(t, p.text_proj, bound);
    auto b_t = bind(t, p.text_bias, bound);
    auto q = t.add_rowvec(t.matmul(f_text, w_t), b_t);  // N x C

    if (p.cls_modulation_on) {
        auto w_mod = bind(t, p.cls_mod_w, bound);
        auto b_mod = bind(t, p.cls_mod_b, bound);
        auto gb = t.add_rowvec(t.matmul(cls, w_mod), b_mod);  // 1 x 2C
        auto gamma = t.cols(gb, 0, p.C);
        auto beta = t.cols(gb, p.C, 2 * p.C);
        q = t.add_rowvec(t.mul_rowvec(q, gamma), beta);
    }

    const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(p.C));
    for (auto& blk : p.blocks) {
        auto w_q = bind(t, blk.w_q, bound);
        auto w_k = bind(t, blk.w_k, bound);
        auto w_v = bind(t, blk.w_v, bound);
        auto w_o = bind(t, blk.w_o, bound);
        auto scores = t.scale(t.matmul_nt(t.matmul(q, w_q), t.matmul(f_enhanced, w_k)),
                              inv_sqrt_c);                        // N x L
        auto attn = t.softmax_rows(scores);
        auto ctx = t.matmul(t.matmul(attn, t.matmul(f_enhanced, w_v)), w_o);  // N x C
        q = t.add(q, ctx);
        auto ffn_w1 = bind(t, blk.ffn_w1, bound);
        auto ffn_b1 = bind(t, blk.ffn_b1, bound);
        auto ffn_w2 = bind(t, blk.ffn_w2, bound);
        auto ffn_b2 = bind(t, blk.ffn_b2, bound);
        auto hidden = t.relu(t.add_rowvec(t.matmul(q, ffn_w1), ffn_b1));
        q = t.add(q, t.add_rowvec(t.matmul(hidden, ffn_w2), ffn_b2));
    }

    auto qn = t.l2_normalize_rows(q);
    auto pn = t.l2_normalize_rows(f_enhanced);
    auto maps = t.sigmoid(t.scale(t.matmul_nt(qn, pn), p.out_temperature));  // N x L
    return {q, maps};
}

/// Value-level decode: per-affordance heatmaps bilinearly upsampled to
/// (out_h, out_w). Every output value lies in (0,1).
inline std::vector<Heatmap> decode(const FeatureMap& f_enhanced, const TextEmbedding& f_text,
                                   const std::vector<double>& cls, DecoderParams& p, int out_h,
                                   int out_w) {
    f_enhanced.check();
    ad::Tape t;
    auto f = t.constant(f_enhanced.rows, f_enhanced.channels, f_enhanced.values);
    auto ft = t.constant(f_text.rows, f_text.channels, f_text.values);
    auto c = t.constant(1, static_cast<int>(cls.size()), cls);
    auto fwd = decode_tape(t, f, ft, c, p);
    const auto& maps = t.value(fwd.grid_maps);
    std::vector<Heatmap> out;
    for (int i = 0; i < f_text.rows; ++i) {
        Heatmap grid(f_enhanced.grid_h, f_enhanced.grid_w, MapKind::Probability);
        std::copy_n(&maps[static_cast<size_t>(i) * f_enhanced.rows], f_enhanced.rows,
                    grid.values.begin());
        out.push_back(resample(grid, out_h, out_w));
    }
    return out;
}

/// Mean per-pixel binary cross-entropy with the dense GT as soft target.
inline double grounding_loss(const Heatmap& pred, const Heatmap& gt) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw ShapeError("grounding_loss: shape mismatch");
    constexpr double eps = 1e-12;
    double loss = 0;
    for (size_t i = 0; i < pred.values.size(); ++i) {
        const double p = pred.values[i], t = gt.values[i];
        loss -= t * std::log(p + eps) + (1 - t) * std::log(1 - p + eps);
    }
    return loss / static_cast<double>(pred.values.size());
}

}  // namespace osagdo

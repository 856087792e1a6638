#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "osagdo/autodiff.hpp"
#include "osagdo/defosem.hpp"  // ParamBinding / bind
#include "osagdo/encoders.hpp"
#include "osagdo/rng.hpp"

namespace osagdo {

/// Learnable prompt context plus the Meta-Net that conditions it on the
/// image. The conditioning vector pi is added to every context vector:
/// v_m(x) = v_m + pi.
struct PromptParams {
    int M_ctx = 4;
    int d_ctx = 0;  // context / token embedding width
    int d_vis = 0;  // visual feature width feeding the Meta-Net
    int d_text = 0;  // text embedding width (class-probability space)
    int hidden = 0;  // bottleneck width, d_vis / 24
    double tau = 0.07;

    ad::Param context;  // M_ctx x d_ctx
    ad::Param metanet_w1, metanet_b1;  // d_vis -> hidden
    ad::Param metanet_w2, metanet_b2;  // hidden -> d_ctx
    ad::Param x_proj, x_bias;  // d_vis -> d_text affine visual projection

    PromptParams() = default;
    PromptParams(int m_ctx, int d_ctx_, int d_vis_, int d_text_, Rng& rng)
        : M_ctx(m_ctx), d_ctx(d_ctx_), d_vis(d_vis_), d_text(d_text_), hidden(d_vis_ / 24) {
        if (hidden < 1) throw ShapeError("PromptParams: d_vis must be >= 24 (bottleneck /24)");
        context.name = "prompts.context";
        context.rows = M_ctx;
        context.cols = d_ctx;
        context.values.resize(static_cast<size_t>(M_ctx) * d_ctx);
        for (auto& v : context.values) v = rng.normal(0.0, 0.02);
        auto uniform_fan_in = [&rng](ad::Param& p, const std::string& name, int rows, int cols,
                                     int fan_in) {
            p.name = "prompts." + name;
            p.rows = rows;
            p.cols = cols;
            p.values.resize(static_cast<size_t>(rows) * cols);
            const double b = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (auto& v : p.values) v = rng.uniform(-b, b);
        };
        uniform_fan_in(metanet_w1, "metanet_w1", d_vis, hidden, d_vis);
        uniform_fan_in(metanet_b1, "metanet_b1", 1, hidden, d_vis);
        uniform_fan_in(metanet_w2, "metanet_w2", hidden, d_ctx, hidden);
        uniform_fan_in(metanet_b2, "metanet_b2", 1, d_ctx, hidden);
        uniform_fan_in(x_proj, "x_proj", d_vis, d_text, d_vis);
        for (auto& v : x_proj.values) v *= 3.0;  // |x_proj(x)| ~ O(1) for unit input
        x_bias.name = "prompts.x_bias";
        x_bias.rows = 1;
        x_bias.cols = d_text;
        x_bias.values.assign(static_cast<size_t>(d_text), 0.0);
    }

    template <class F>
    void for_each_param(F f) {
        f(context), f(metanet_w1), f(metanet_b1), f(metanet_w2), f(metanet_b2);
        f(x_proj), f(x_bias);
    }
};

/// Fixed per-affordance class token sequences c_i.
struct ClassTokenTable {
    std::vector<std::string> names;
    std::vector<std::vector<std::vector<double>>> tokens;  // per class: T_i x d_ctx

    static ClassTokenTable build(const std::vector<std::string>& names,
                                 const ToyTextEncoder& text) {
        ClassTokenTable t;
        t.names = names;
        for (const auto& name : names) {
            std::vector<std::vector<double>> seq;
            for (const auto& tok : ToyTextEncoder::tokenize(name))
                seq.push_back(text.token_embedding(tok));
            if (seq.empty()) throw ValidationError("class name tokenizes to nothing: " + name);
            t.tokens.push_back(std::move(seq));
        }
        return t;
    }
};

/// pi = W2 relu(W1 x + b1) + b2 where x is the patch-mean of the
/// enhanced features. Returns a 1 x d_ctx row on the tape.
inline ad::Tape::Var metanet_pi(ad::Tape& t, ad::Tape::Var f_enhanced, PromptParams& p,
                                ParamBinding* bound = nullptr) {
    auto w1 = bind(t, p.metanet_w1, bound);
    auto b1 = bind(t, p.metanet_b1, bound);
    auto w2 = bind(t, p.metanet_w2, bound);
    auto b2 = bind(t, p.metanet_b2, bound);
    auto x = t.mean_rows(f_enhanced);
    auto h = t.relu(t.add_rowvec(t.matmul(x, w1), b1));
    return t.add_rowvec(t.matmul(h, w2), b2);
}

/// Builds t_i(x) = [v_1+pi, ..., v_Mctx+pi, c_i tokens] per class.
/// pi < 0 means "no conditioning" (static context).
inline std::vector<ad::Tape::Var> prompt_sequences(ad::Tape& t, PromptParams& p,
                                                   const ClassTokenTable& table,
                                                   ad::Tape::Var pi,  // 1 x d_ctx, or -1
                                                   ParamBinding* bound = nullptr) {
    auto ctx = bind(t, p.context, bound);
    auto shifted = pi >= 0 ? t.add_rowvec(ctx, pi) : ctx;
    std::vector<ad::Tape::Var> seqs;
    for (const auto& toks : table.tokens) {
        std::vector<double> flat;
        for (const auto& v : toks) flat.insert(flat.end(), v.begin(), v.end());
        auto tok_var = t.constant(static_cast<int>(toks.size()), p.d_ctx, std::move(flat));
        seqs.push_back(t.concat_rows({shifted, tok_var}));
    }
    return seqs;
}

/// Projects the pooled visual feature into the text-embedding space
/// (the class-probability comparison space).
inline ad::Tape::Var visual_class_feature(ad::Tape& t, ad::Tape::Var f_enhanced, PromptParams& p,
                                          ParamBinding* bound = nullptr) {
    auto w = bind(t, p.x_proj, bound);
    auto b = bind(t, p.x_bias, bound);
    // normalizing the pooled feature decouples the head's step size from
    // the (drifting) magnitude of the enhanced features
    auto x = t.l2_normalize_rows(t.mean_rows(f_enhanced));
    return t.add_rowvec(t.matmul(x, w), b);
}

/// Softmax over cosine similarities at temperature tau: 1 x N row.
inline ad::Tape::Var class_probs_tape(ad::Tape& t, ad::Tape::Var x_feat, ad::Tape::Var f_text,
                                      double tau) {
    auto xn = t.l2_normalize_rows(x_feat);
    auto fn = t.l2_normalize_rows(f_text);
    return t.softmax_rows(t.scale(t.matmul_nt(xn, fn), 1.0 / tau));
}

// ---- value-level wrappers ----

inline std::vector<double> conditioning_vector(const FeatureMap& f_enhanced, PromptParams& p) {
    ad::Tape t;
    auto f = t.constant(f_enhanced.rows, f_enhanced.channels, f_enhanced.values);
    return t.value(metanet_pi(t, f, p));
}

inline std::vector<std::vector<std::vector<double>>> build_prompts(
    PromptParams& p, const ClassTokenTable& table, const std::vector<double>& pi) {
    if (static_cast<int>(pi.size()) != p.d_ctx)
        throw ShapeError("build_prompts: pi length != d_ctx");
    std::vector<std::vector<std::vector<double>>> out;
    for (const auto& toks : table.tokens) {
        std::vector<std::vector<double>> seq;
        for (int m = 0; m < p.M_ctx; ++m) {
            std::vector<double> v(p.d_ctx);
            for (int j = 0; j < p.d_ctx; ++j) v[j] = p.context.values[m * p.d_ctx + j] + pi[j];
            seq.push_back(std::move(v));
        }
        for (const auto& tok : toks) seq.push_back(tok);
        out.push_back(std::move(seq));
    }
    return out;
}

inline std::vector<double> class_probabilities(const std::vector<double>& x_feat,
                                               const TextEmbedding& f_text, double tau) {
    ad::Tape t;
    auto x = t.constant(1, static_cast<int>(x_feat.size()), x_feat);
    auto ft = t.constant(f_text.rows, f_text.channels, f_text.values);
    return t.value(class_probs_tape(t, x, ft, tau));
}

}  // namespace osagdo

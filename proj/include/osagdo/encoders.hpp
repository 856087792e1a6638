#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "osagdo/autodiff.hpp"
#include "osagdo/core.hpp"
#include "osagdo/error.hpp"
#include "osagdo/rng.hpp"

namespace osagdo {

/// Patch features plus the encoder's global summary token.
struct VisionEncoding {
    FeatureMap patches;       // L x C
    std::vector<double> cls;  // C
};

/// One row per affordance prompt, each L2-normalized to the text space.
struct TextEmbedding {
    int rows = 0;
    int channels = 0;  // C_t
    std::vector<double> values;

    const double* row(int i) const { return &values[static_cast<size_t>(i) * channels]; }
};

struct EncoderSpec {
    enum class Kind { Toy, Adapter };
    Kind kind = Kind::Toy;
    std::string adapter_name;  // Adapter kind only
    int input_size = 224;
    int patch_size = 16;
    int channels = 96;       // C, visual (and text output: prompts are compared to image features)
    int text_channels = 96;  // C_t
    int token_dim = 64;      // prompt/token embedding width
    std::uint64_t seed = 1234;

    int grid_side() const {
        if (input_size % patch_size != 0)
            throw ShapeError("EncoderSpec: input_size not divisible by patch_size");
        return input_size / patch_size;
    }
};

/// Deterministic stand-in for a frozen ViT backbone. Each patch is
/// flattened, pushed through a fixed seeded Gaussian projection and
/// tanh-squashed; cls is the mean patch embedding.
class ToyVisionEncoder {
public:
    explicit ToyVisionEncoder(const EncoderSpec& spec) : spec_(spec) {
        const int in_dim = spec.patch_size * spec.patch_size * 3;
        Rng rng(spec.seed);
        const double s = 1.0 / std::sqrt(static_cast<double>(in_dim));
        proj_.resize(static_cast<size_t>(in_dim) * spec.channels);
        for (auto& w : proj_) w = rng.normal(0.0, s);
    }

    VisionEncoding encode(const Image& img) const {
        if (img.height != spec_.input_size || img.width != spec_.input_size)
            throw ShapeError("ToyVisionEncoder: image is " + std::to_string(img.height) + "x" +
                             std::to_string(img.width) + ", expected " +
                             std::to_string(spec_.input_size));
        const int side = spec_.grid_side();
        const int P = spec_.patch_size;
        const int C = spec_.channels;
        const int in_dim = P * P * 3;
        VisionEncoding enc;
        enc.patches = FeatureMap(side, side, C);
        enc.cls.assign(C, 0.0);
        std::vector<double> flat(in_dim);
        for (int gy = 0; gy < side; ++gy)
            for (int gx = 0; gx < side; ++gx) {
                int k = 0;
                for (int py = 0; py < P; ++py)
                    for (int px = 0; px < P; ++px)
                        for (int c = 0; c < 3; ++c)
                            // centered pixels: keeps the projection from being
                            // dominated by a shared brightness direction
                            flat[k++] = img.at(gy * P + py, gx * P + px, c) / 255.0 - 0.5;
                const int row = gy * side + gx;
                for (int c = 0; c < C; ++c) {
                    double s = 0;
                    for (int i = 0; i < in_dim; ++i) s += flat[i] * proj_[i * C + c];
                    const double v = std::tanh(s);
                    enc.patches.at(row, c) = v;
                    enc.cls[c] += v;
                }
            }
        for (double& v : enc.cls) v /= side * side;
        return enc;
    }

private:
    EncoderSpec spec_;
    std::vector<double> proj_;
};

/// Deterministic text head: mean-pool the prompt's vector sequence,
/// apply a fixed seeded linear map to C_t, L2-normalize.
class ToyTextEncoder {
public:
    explicit ToyTextEncoder(const EncoderSpec& spec) : spec_(spec) {
        Rng rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
        const double s = 1.0 / std::sqrt(static_cast<double>(spec.token_dim));
        proj_.resize(static_cast<size_t>(spec.token_dim) * spec.text_channels);
        for (auto& w : proj_) w = rng.normal(0.0, s);
    }

    /// Embeds prompt sequences (each a list of token_dim vectors).
    TextEmbedding embed(const std::vector<std::vector<std::vector<double>>>& prompts) const {
        TextEmbedding out;
        out.rows = static_cast<int>(prompts.size());
        out.channels = spec_.text_channels;
        out.values.reserve(static_cast<size_t>(out.rows) * out.channels);
        for (const auto& seq : prompts) {
            auto row = embed_one(seq);
            out.values.insert(out.values.end(), row.begin(), row.end());
        }
        return out;
    }

    std::vector<double> embed_one(const std::vector<std::vector<double>>& seq) const {
        if (seq.empty()) throw ValidationError("embed_prompts: empty prompt");
        std::vector<double> mean(spec_.token_dim, 0.0);
        for (const auto& tok : seq) {
            if (static_cast<int>(tok.size()) != spec_.token_dim)
                throw ShapeError("embed_prompts: token width mismatch");
            for (int i = 0; i < spec_.token_dim; ++i) mean[i] += tok[i];
        }
        for (double& v : mean) v /= static_cast<double>(seq.size());
        std::vector<double> row(spec_.text_channels, 0.0);
        for (int i = 0; i < spec_.token_dim; ++i)
            for (int j = 0; j < spec_.text_channels; ++j)
                row[j] += mean[i] * proj_[i * spec_.text_channels + j];
        double n = 0;
        for (double v : row) n += v * v;
        n = std::sqrt(n);
        if (n == 0.0) throw ValidationError("embed_prompts: zero-norm embedding");
        for (double& v : row) v /= n;
        return row;
    }

    /// Differentiable path: seq is (len x token_dim) on the tape.
    ad::Tape::Var embed_tape(ad::Tape& t, ad::Tape::Var seq) const {
        if (t.rows(seq) == 0) throw ValidationError("embed_prompts: empty prompt");
        auto mean = t.mean_rows(seq);
        auto proj = t.constant(spec_.token_dim, spec_.text_channels, proj_);
        return t.l2_normalize_rows(t.matmul(mean, proj));
    }

    /// Fixed embedding for one token string (seeded by the token text).
    std::vector<double> token_embedding(const std::string& token) const {
        Rng rng(fnv1a(token) ^ spec_.seed);
        std::vector<double> v(spec_.token_dim);
        const double s = 1.0 / std::sqrt(static_cast<double>(spec_.token_dim));
        for (auto& x : v) x = rng.normal(0.0, s);
        return v;
    }

    /// Splits on whitespace and underscores.
    static std::vector<std::string> tokenize(const std::string& text) {
        std::vector<std::string> toks;
        std::string cur;
        for (char c : text) {
            if (c == ' ' || c == '_' || c == '\t') {
                if (!cur.empty()) toks.push_back(std::move(cur)), cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        if (!cur.empty()) toks.push_back(std::move(cur));
        return toks;
    }

private:
    EncoderSpec spec_;
    std::vector<double> proj_;
};

/// In-process registry for pretrained-backbone adapters. Backends are
/// frozen-weights, inference-only; gradients never flow into them.
class VisionBackendRegistry {
public:
    using Backend = std::function<VisionEncoding(const Image&)>;

    static VisionBackendRegistry& instance() {
        static VisionBackendRegistry r;
        return r;
    }

    void register_backend(const std::string& name, Backend fn) { backends_[name] = std::move(fn); }

    const Backend& get(const std::string& name) const {
        auto it = backends_.find(name);
        if (it == backends_.end())
            throw ValidationError("no vision backend registered under '" + name + "'");
        return it->second;
    }

private:
    std::map<std::string, Backend> backends_;
};

inline VisionEncoding encode_image(const Image& img, const EncoderSpec& spec) {
    if (spec.kind == EncoderSpec::Kind::Adapter)
        return VisionBackendRegistry::instance().get(spec.adapter_name)(img);
    return ToyVisionEncoder(spec).encode(img);
}

inline TextEmbedding embed_prompts(const std::vector<std::vector<std::vector<double>>>& prompts,
                                   const EncoderSpec& spec) {
    return ToyTextEncoder(spec).embed(prompts);
}

}  // namespace osagdo

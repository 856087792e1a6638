#include <doctest.h>

#include <cmath>

#include "grad_check.hpp"
#include "osagdo/prompts.hpp"
#include "osagdo/rng.hpp"

using namespace osagdo;

namespace {
PromptParams make_params(int m_ctx, int d_ctx, int d_vis, std::uint64_t seed) {
    Rng rng(seed);
    return PromptParams(m_ctx, d_ctx, d_vis, d_vis, rng);
}

ClassTokenTable sample_table(int d_ctx) {
    EncoderSpec spec;
    spec.token_dim = d_ctx;
    ToyTextEncoder text(spec);
    return ClassTokenTable::build({"grasp_collar", "fold_left_side", "put_center"}, text);
}
}  // namespace

TEST_CASE("zero conditioning reduces to the static context exactly") {
    auto p = make_params(4, 48, 48, 1);
    auto table = sample_table(48);
    auto with_zero = build_prompts(p, table, std::vector<double>(48, 0.0));
    for (size_t i = 0; i < table.tokens.size(); ++i) {
        for (int m = 0; m < p.M_ctx; ++m)
            for (int j = 0; j < p.d_ctx; ++j)
                CHECK(with_zero[i][m][j] == p.context.values[m * p.d_ctx + j]);
        // trailing rows are the untouched class tokens
        for (size_t k = 0; k < table.tokens[i].size(); ++k)
            CHECK(with_zero[i][p.M_ctx + k] == table.tokens[i][k]);
    }
}

TEST_CASE("conditioning shifts every context row by the same pi") {
    auto p = make_params(4, 48, 48, 2);
    auto table = sample_table(48);
    std::vector<double> pi(48);
    Rng rng(3);
    for (auto& v : pi) v = rng.normal();
    auto shifted = build_prompts(p, table, pi);
    for (int m = 0; m < p.M_ctx; ++m)
        for (int j = 0; j < p.d_ctx; ++j)
            CHECK(shifted[0][m][j] ==
                  doctest::Approx(p.context.values[m * p.d_ctx + j] + pi[j]).epsilon(1e-12));
}

TEST_CASE("bottleneck width is d_vis / 24 and rejects d_vis < 24") {
    auto p = make_params(4, 48, 96, 4);
    CHECK(p.hidden == 4);
    Rng rng(5);
    CHECK_THROWS_AS(PromptParams(4, 48, 23, 48, rng), ShapeError);
}

TEST_CASE("class probabilities sum to one and lie in (0,1)") {
    Rng rng(6);
    std::vector<double> x(32);
    for (auto& v : x) v = rng.normal();
    TextEmbedding emb;
    emb.rows = 5;
    emb.channels = 32;
    emb.values.resize(5 * 32);
    for (auto& v : emb.values) v = rng.normal();
    auto probs = class_probabilities(x, emb, 0.07);
    double sum = 0;
    for (double v : probs) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
        sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("temperature changes sharpness but not the argmax") {
    Rng rng(7);
    std::vector<double> x(24);
    for (auto& v : x) v = rng.normal();
    TextEmbedding emb;
    emb.rows = 4;
    emb.channels = 24;
    emb.values.resize(4 * 24);
    for (auto& v : emb.values) v = rng.normal();
    auto argmax_of = [](const std::vector<double>& v) {
        return static_cast<size_t>(std::max_element(v.begin(), v.end()) - v.begin());
    };
    auto sharp = class_probabilities(x, emb, 0.01);
    auto soft = class_probabilities(x, emb, 10.0);
    CHECK(argmax_of(sharp) == argmax_of(soft));
    CHECK(*std::max_element(sharp.begin(), sharp.end()) >=
          *std::max_element(soft.begin(), soft.end()));
}

TEST_CASE("cosine similarity ignores the scale of x") {
    Rng rng(8);
    std::vector<double> x(24), x5(24);
    for (size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.normal();
        x5[i] = 5.0 * x[i];
    }
    TextEmbedding emb;
    emb.rows = 3;
    emb.channels = 24;
    emb.values.resize(3 * 24);
    for (auto& v : emb.values) v = rng.normal();
    auto a = class_probabilities(x, emb, 0.07);
    auto b = class_probabilities(x5, emb, 0.07);
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-9));
}

TEST_CASE("conditioning vector is deterministic and image-dependent") {
    auto p = make_params(4, 48, 48, 9);
    FeatureMap fa(2, 2, 48), fb(2, 2, 48);
    Rng rng(10);
    for (auto& v : fa.values) v = rng.normal();
    for (auto& v : fb.values) v = rng.normal();
    auto pi_a1 = conditioning_vector(fa, p);
    auto pi_a2 = conditioning_vector(fa, p);
    auto pi_b = conditioning_vector(fb, p);
    CHECK(pi_a1 == pi_a2);
    CHECK(pi_a1 != pi_b);
    CHECK(pi_a1.size() == 48);
}

TEST_CASE("prompt sequence shapes: M_ctx context rows plus class tokens") {
    auto p = make_params(4, 48, 48, 11);
    auto table = sample_table(48);
    auto seqs = build_prompts(p, table, std::vector<double>(48, 0.1));
    REQUIRE(seqs.size() == table.tokens.size());
    for (size_t i = 0; i < seqs.size(); ++i)
        CHECK(seqs[i].size() == static_cast<size_t>(p.M_ctx) + table.tokens[i].size());
}

TEST_CASE("meta-net and context gradients match finite differences") {
    auto p = make_params(2, 24, 24, 12);
    FeatureMap f(2, 2, 24);
    Rng rng(13);
    for (auto& v : f.values) v = rng.normal();
    auto res = testing::check_gradients([&](ad::Tape& t, ParamBinding& bound) {
        auto fv = t.constant(f.rows, f.channels, f.values);
        auto pi = metanet_pi(t, fv, p, &bound);
        auto ctx = bind(t, p.context, &bound);
        auto shifted = t.add_rowvec(ctx, pi);
        auto pooled = t.sigmoid(t.mean_rows(shifted));
        return t.bce_loss(pooled, std::vector<double>(p.d_ctx, 0.4));
    });
    CHECK(res.checked > 0);
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("class probability gradients flow into the similarity inputs") {
    Rng rng(14);
    ad::Param x;
    x.name = "x_feat";
    x.rows = 1;
    x.cols = 16;
    x.values.resize(16);
    for (auto& v : x.values) v = rng.normal();
    std::vector<double> text(3 * 16);
    for (auto& v : text) v = rng.normal();
    auto res = testing::check_gradients([&](ad::Tape& t, ParamBinding& bound) {
        auto vx = bind(t, x, &bound);
        auto ft = t.constant(3, 16, text);
        auto probs = class_probs_tape(t, vx, ft, 0.5);
        return t.nll_loss(probs, 1);
    });
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("empty class name is rejected at table build time") {
    EncoderSpec spec;
    spec.token_dim = 32;
    ToyTextEncoder text(spec);
    CHECK_THROWS_AS(ClassTokenTable::build({"grasp_hem", "  "}, text), ValidationError);
}

// Acceptance gate: nine go/no-go checks covering the equation oracles,
// invariants, gradients, metrics, prompt semantics, end-to-end training,
// ablation structure, determinism, and the data pipeline. Prints one
// PASS/FAIL line per criterion and exits non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "grad_check.hpp"
#include "oracles.hpp"
#include "osagdo/trainer.hpp"

using namespace osagdo;
namespace fs = std::filesystem;

namespace {

struct Check {
    bool ok = true;
    std::string detail;

    void require(bool cond, const std::string& why) {
        if (!cond && ok) {
            ok = false;
            detail = why;
        }
    }
};

fs::path scratch_dir(const std::string& leaf) {
    auto dir = fs::temp_directory_path() / ("osagdo_accept_" + leaf);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

Heatmap random_heatmap(int h, int w, Rng& rng, double lo = 0.0, double hi = 1.0) {
    Heatmap m(h, w, MapKind::Probability);
    for (auto& v : m.values) v = rng.uniform(lo, hi);
    return m;
}

// ---- criterion 1: equation oracles ----

Check c1_equation_oracles() {
    Check c;
    Rng rng(41);
    // feature enhancement vs the scalar reimplementation
    for (int trial = 0; trial < 5; ++trial) {
        const int C = 8, side = 4;
        DefoSEMParams p(C, side, side, rng);
        p.channel_gate_on = trial != 3;
        p.spatial_gate_on = trial != 4;
        FeatureMap f(side, side, C);
        for (auto& v : f.values) v = rng.normal();
        Heatmap label = random_heatmap(side, side, rng);
        for (const Heatmap* lab :
             std::initializer_list<const Heatmap*>{nullptr, &label}) {
            auto got = enhance(f, lab, p);
            std::vector<double> lab_vec;
            if (lab) lab_vec = lab->values;
            auto want = testing::enhance_oracle(f, lab ? &lab_vec : nullptr, p);
            for (size_t i = 0; i < want.size(); ++i)
                c.require(std::abs(got.values[i] - want[i]) < 1e-10,
                          "enhance mismatch vs scalar oracle");
        }
    }
    // keypoint fusion vs the scalar chain, both clamp branches exercised
    bool hit_upper = false, hit_lower = false;
    for (int trial = 0; trial < 5; ++trial) {
        const int h = 6, w = 7;
        Heatmap pred = random_heatmap(h, w, rng, -0.2, 1.2);
        Heatmap region = random_heatmap(h, w, rng, 0.0, 3.0);
        OEKFMConfig ocfg;
        auto mprime = normalize_region(region, ocfg);
        auto fused = fuse(pred, mprime);
        auto want = testing::fuse_oracle(pred.values, region.values, ocfg.epsilon);
        for (size_t i = 0; i < want.size(); ++i) {
            c.require(fused.values[i] == want[i], "fuse mismatch vs scalar oracle");
            if (pred.values[i] * mprime.values[i] > 1.0) hit_upper = true;
            if (pred.values[i] < 0.0) hit_lower = true;
        }
        for (double v : mprime.values)
            c.require(v >= 1.0 && v < 2.0, "weight map left [1,2)");
    }
    c.require(hit_upper && hit_lower, "clamp branches not both exercised");
    // constant region maps normalize to exactly one
    Heatmap flat(5, 5, MapKind::Probability);
    for (auto& v : flat.values) v = 0.37;
    OEKFMConfig ocfg;
    for (double v : normalize_region(flat, ocfg).values)
        c.require(v == 1.0, "constant region map did not normalize to 1");
    return c;
}

// ---- criterion 2: amplify-only invariant ----

Check c2_amplify_only() {
    Check c;
    Rng rng(42);
    OEKFMConfig ocfg;
    ocfg.sigma_px = 4.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int h = 16, w = 16;
        Heatmap pred = random_heatmap(h, w, rng);
        std::vector<Keypoint> kps;
        const int nk = 1 + static_cast<int>(rng.uniform_int(6));
        for (int i = 0; i < nk; ++i)
            kps.push_back({rng.uniform(0.0, w - 1.0), rng.uniform(0.0, h - 1.0), 1.0});
        auto fused = fuse(pred, normalize_region(region_map(kps, h, w, ocfg), ocfg));
        for (size_t i = 0; i < fused.values.size(); ++i) {
            const double p = pred.values[i], q = fused.values[i];
            c.require(q >= p, "fusion attenuated the prediction");
            c.require(q <= std::min(1.0, 2.0 * p), "fusion exceeded the 2x / clamp bound");
        }
    }
    return c;
}

// ---- criterion 3: gradient suite ----

Check c3_gradients() {
    Check c;
    auto expect = [&c](const char* who, const testing::GradCheckResult& r) {
        c.require(r.checked > 0, std::string(who) + ": nothing checked");
        c.require(r.max_rel_err < 1e-4,
                  std::string(who) + ": gradient mismatch at " + r.worst_param);
    };

    {  // feature enhancement module
        Rng rng(51);
        DefoSEMParams p(4, 2, 2, rng);
        FeatureMap f(2, 2, 4);
        for (auto& v : f.values) v = rng.normal();
        expect("enhancement", testing::check_gradients([&](ad::Tape& t, ParamBinding& bound) {
                   auto fv = t.constant(f.rows, f.channels, f.values);
                   auto out = defosem_forward(t, fv, nullptr, p, &bound).out;
                   auto pooled = t.sigmoid(t.mean_rows(out));
                   return t.bce_loss(pooled, std::vector<double>(4, 0.3));
               }));
    }
    {  // conditioning network and context vectors
        Rng rng(52);
        PromptParams p(2, 24, 24, 24, rng);
        FeatureMap f(2, 2, 24);
        for (auto& v : f.values) v = rng.normal();
        expect("conditioning", testing::check_gradients([&](ad::Tape& t, ParamBinding& bound) {
                   auto fv = t.constant(f.rows, f.channels, f.values);
                   auto pi = metanet_pi(t, fv, p, &bound);
                   auto ctx = bind(t, p.context, &bound);
                   auto pooled = t.sigmoid(t.mean_rows(t.add_rowvec(ctx, pi)));
                   return t.bce_loss(pooled, std::vector<double>(24, 0.4));
               }));
    }
    {  // decoder
        Rng rng(53);
        DecoderParams p(1, 8, 8, rng);
        FeatureMap f(2, 2, 8);
        std::vector<double> text(3 * 8), cls(8), target(3 * 4);
        for (auto& v : f.values) v = rng.normal();
        for (auto& v : text) v = rng.normal();
        for (auto& v : cls) v = rng.normal();
        for (auto& v : target) v = rng.uniform();
        expect("decoder", testing::check_gradients([&](ad::Tape& t, ParamBinding& bound) {
                   auto fv = t.constant(f.rows, f.channels, f.values);
                   auto ft = t.constant(3, 8, text);
                   auto cv = t.constant(1, 8, cls);
                   auto fwd = decode_tape(t, fv, ft, cv, p, &bound);
                   return t.bce_loss(fwd.grid_maps, target);
               }));
    }
    {  // class-probability head
        Rng rng(54);
        PromptParams p(2, 24, 24, 24, rng);
        FeatureMap f(2, 2, 24);
        std::vector<double> text(3 * 24);
        for (auto& v : f.values) v = rng.normal();
        for (auto& v : text) v = rng.normal();
        expect("class head", testing::check_gradients([&](ad::Tape& t, ParamBinding& bound) {
                   auto fv = t.constant(f.rows, f.channels, f.values);
                   auto x = visual_class_feature(t, fv, p, &bound);
                   auto ft = t.constant(3, 24, text);
                   auto probs = class_probs_tape(t, x, ft, 0.5);
                   return t.nll_loss(probs, 1);
               }));
    }
    return c;
}

// ---- criterion 4: metric oracles ----

Check c4_metrics() {
    Check c;
    Rng rng(61);
    Heatmap g = random_heatmap(6, 6, rng, 0.1, 1.0);
    c.require(std::abs(kld(g, g)) < 1e-9, "kld(g,g) != 0");
    c.require(std::abs(sim(g, g) - 1.0) < 1e-9, "sim(g,g) != 1");

    Heatmap uni(2, 2, MapKind::Probability);
    for (auto& v : uni.values) v = 0.25;
    Heatmap two(2, 2, MapKind::Probability);
    two.values = {0.5, 0.5, 0.0, 0.0};
    c.require(std::abs(kld(uni, two) - std::log(2.0)) < 1e-9, "uniform-vs-two-point != ln 2");

    Heatmap pred(2, 2, MapKind::Probability);
    pred.values = {1.0, 0.0, 0.0, 0.0};
    Heatmap fix(2, 2, MapKind::Probability);
    fix.values = {1.0, 0.0, 0.0, 0.0};
    c.require(std::abs(nss(pred, fix) - 1.7321) < 1e-4, "hand-computed NSS case off");

    for (int trial = 0; trial < 100; ++trial) {
        Heatmap m = random_heatmap(5, 7, rng);
        Heatmap fx(5, 7, MapKind::Probability);
        fx.values[rng.uniform_int(35)] = 1.0;
        const double base = nss(m, fx);
        Heatmap affine = m;
        const double a = rng.uniform(0.1, 10.0), b = rng.uniform(-5.0, 5.0);
        for (auto& v : affine.values) v = a * v + b;
        c.require(std::abs(nss(affine, fx) - base) < 1e-9, "NSS not affine invariant");
    }
    return c;
}

// ---- criterion 5: prompt-conditioning semantics ----

Check c5_prompts() {
    Check c;
    Rng rng(71);
    PromptParams p(4, 32, 32, 32, rng);
    EncoderSpec spec;
    spec.token_dim = 32;
    ToyTextEncoder text(spec);
    auto table = ClassTokenTable::build({"grasp_collar", "put_center", "grasp_hem"}, text);
    auto seqs = build_prompts(p, table, std::vector<double>(32, 0.0));
    for (size_t i = 0; i < table.tokens.size(); ++i) {
        for (int m = 0; m < p.M_ctx; ++m)
            for (int j = 0; j < p.d_ctx; ++j)
                c.require(seqs[i][m][j] == p.context.values[m * p.d_ctx + j],
                          "zero conditioning is not the static context");
        for (size_t k = 0; k < table.tokens[i].size(); ++k)
            c.require(seqs[i][p.M_ctx + k] == table.tokens[i][k], "class tokens were altered");
    }

    std::vector<double> x(24);
    for (auto& v : x) v = rng.normal();
    TextEmbedding emb;
    emb.rows = 5;
    emb.channels = 24;
    emb.values.resize(5 * 24);
    for (auto& v : emb.values) v = rng.normal();
    auto argmax_of = [](const std::vector<double>& v) {
        return std::max_element(v.begin(), v.end()) - v.begin();
    };
    long ref_arg = -1;
    for (double tau : {0.01, 0.07, 1.0, 10.0}) {
        auto probs = class_probabilities(x, emb, tau);
        double sum = 0;
        for (double v : probs) sum += v;
        c.require(std::abs(sum - 1.0) < 1e-9, "softmax row does not sum to 1");
        if (ref_arg < 0) ref_arg = argmax_of(probs);
        c.require(argmax_of(probs) == ref_arg, "argmax changed under temperature scaling");
    }
    return c;
}

// ---- criterion 6: one-shot overfit smoke test ----

Check c6_overfit(Model** model_out, Dataset* ds_out, SplitSpec* split_out) {
    Check c;
    auto dir = scratch_dir("fixture");
    auto ds = load_manifest(make_fixture(7, dir.string()));
    auto split = make_one_shot_split(ds.records);
    TrainConfig cfg;  // defaults throughout, only the iteration budget shrinks
    cfg.iterations = 500;
    EncoderSpec spec;
    static Model model(cfg, spec, ds.schema);
    auto res = train(model, ds, split);

    double first10 = 0, last100 = 0;
    for (int i = 0; i < 10; ++i) first10 += res.loss_curve[i];
    first10 /= 10;
    for (int i = cfg.iterations - 100; i < cfg.iterations; ++i) last100 += res.loss_curve[i];
    last100 /= 100;
    c.require(last100 < 0.5 * first10, "loss did not halve: " + std::to_string(last100) +
                                           " vs first-10 mean " + std::to_string(first10));

    for (int idx : split.train) {
        const auto& rec = ds.records[static_cast<size_t>(idx)];
        Image img = read_image(rec.image_path);
        std::map<std::string, Heatmap> dense;
        for (const auto& [aff, pts] : rec.annotations)
            dense.emplace(aff, dense_annotation(rec, aff, cfg.annotation_sigma));
        auto prep = preprocess_eval(img, dense);
        for (const auto& [aff, gt] : prep.heatmaps) {
            auto pred = model.predict(prep.image, ds.schema.affordance_id(aff));
            Heatmap uniform(gt.height, gt.width, MapKind::Probability);
            for (auto& v : uniform.values) v = 1.0;
            const double n = nss(pred, fixations_from_dense(gt));
            const double s = sim(pred, gt), s_uni = sim(uniform, gt);
            c.require(n > 1.0, rec.id + "/" + aff + ": NSS " + std::to_string(n) + " <= 1");
            c.require(s > s_uni, rec.id + "/" + aff + ": SIM " + std::to_string(s) +
                                     " not above uniform " + std::to_string(s_uni));
        }
    }
    *model_out = &model;
    *ds_out = ds;
    *split_out = split;
    return c;
}

// ---- criterion 7: ablation structure ----

Check c7_ablations(const Dataset& ds) {
    Check c;
    EncoderSpec spec;
    TrainConfig base;
    base.iterations = 200;

    auto labels_of = [](const AblationTable& t) {
        std::vector<std::string> l;
        for (const auto& r : t.rows) l.push_back(r.label);
        return l;
    };
    auto modules = ablation_sweep(base, "modules", ds, spec);
    c.require(labels_of(modules) ==
                  std::vector<std::string>{"baseline", "+DefoSEM", "+CoCoOp", "+OEKFM"},
              "module ablation rows wrong");
    auto n_table = ablation_sweep(base, "n", ds, spec);
    c.require(labels_of(n_table) ==
                  std::vector<std::string>{"n=200", "n=400", "n=600", "n=800", "n=1000"},
              "keypoint-count ablation rows wrong");
    auto gates = ablation_sweep(base, "gates", ds, spec);
    c.require(labels_of(gates) ==
                  std::vector<std::string>{"channel", "spatial", "channel+spatial"},
              "gate ablation rows wrong");

    // keypoint fusion only ever changes pixels whose weight exceeds 1
    auto split = make_one_shot_split(ds.records);
    TrainConfig cfg = base;
    Model model(cfg, spec, ds.schema);
    train(model, ds, split);
    for (int idx : split.train) {
        const auto& rec = ds.records[static_cast<size_t>(idx)];
        Image img = read_image(rec.image_path);
        auto prep = preprocess_eval(img, {});
        Heatmap weight;
        Heatmap fused = model.predict(prep.image, 0, nullptr, &weight);
        model.cfg.oekfm_on = false;
        Heatmap raw = model.predict(prep.image, 0);
        model.cfg.oekfm_on = true;
        Heatmap w = resample(weight, raw.height, raw.width);
        for (size_t i = 0; i < raw.values.size(); ++i)
            if (fused.values[i] != raw.values[i])
                c.require(w.values[i] > 1.0, rec.id + ": fusion changed a pixel with weight <= 1");
    }
    return c;
}

// ---- criterion 8: determinism and persistence ----

Check c8_determinism(const Dataset& ds, const SplitSpec& split) {
    Check c;
    EncoderSpec spec;
    TrainConfig cfg;
    cfg.iterations = 100;
    auto dir = scratch_dir("ckpt");

    auto run = [&](const std::string& name) {
        Model model(cfg, spec, ds.schema);
        auto res = train(model, ds, split);
        save_checkpoint((dir / name).string(), model, cfg.iterations, res.rng_state);
        return evaluate(model, ds, split.test).to_table();
    };
    const std::string report_a = run("a.ckpt");
    const std::string report_b = run("b.ckpt");
    c.require(report_a == report_b, "same seed gave different metric reports");

    auto slurp = [](const fs::path& p) {
        std::ifstream is(p, std::ios::binary);
        std::ostringstream ss;
        ss << is.rdbuf();
        return ss.str();
    };
    c.require(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"),
              "same seed gave byte-different checkpoints");

    auto loaded = load_checkpoint((dir / "a.ckpt").string());
    c.require(loaded.iteration == cfg.iterations, "checkpoint iteration not preserved");
    c.require(evaluate(loaded.model, ds, split.test).to_table() == report_a,
              "round-tripped checkpoint evaluates differently");
    return c;
}

// ---- criterion 9: data pipeline ----

Check c9_data_pipeline() {
    Check c;
    auto peak_map = densify({{40.0, 25.0}}, 64, 64, 10.0);
    c.require(peak_map.at(25, 40) == 1.0, "densified annotation peak != 1");

    // relabeling under flips: over many augmentation draws the peak of
    // the (possibly swapped) paired channel must land on the transformed
    // annotation point
    DatasetSchema schema = default_schema();
    Image img(256, 256);
    const double px = 128, py = 120;
    std::map<std::string, Heatmap> maps;
    maps.emplace("grasp_left_sleeve", densify({{px, py}}, 256, 256, 4.0));
    Rng rng(91);
    for (int draw = 0; draw < 1000; ++draw) {
        auto prep = preprocess_train(img, maps, rng, schema);
        const std::string key = prep.flipped ? "grasp_right_sleeve" : "grasp_left_sleeve";
        c.require(prep.heatmaps.count(key) == 1, "flip did not relabel the paired channel");
        const auto& h = prep.heatmaps.at(key);
        const auto it = std::max_element(h.values.begin(), h.values.end());
        const int arg = static_cast<int>(it - h.values.begin());
        int ex = static_cast<int>(px) - prep.crop_x;
        const int ey = static_cast<int>(py) - prep.crop_y;
        if (prep.flipped) ex = h.width - 1 - ex;
        c.require(arg == ey * h.width + ex, "augmented peak not at the transformed point");
    }

    // manifest validation: five crafted violations, each reported
    // against the offending record
    auto dir = scratch_dir("manifest");
    Image tiny(32, 32);
    write_ppm((dir / "ok.ppm").string(), tiny);
    nlohmann::ordered_json m;
    m["schema_version"] = schema.version;
    m["categories"] = schema.categories;
    m["affordances"] = schema.affordances;
    m["flip_pairs"] = nlohmann::json::array();
    m["records"] = nlohmann::ordered_json::array();
    auto rec = [&](const std::string& id, const std::string& cat, const std::string& image,
                   const std::string& aff, double x, double y) {
        nlohmann::ordered_json r;
        r["id"] = id;
        r["image"] = image;
        r["category"] = cat;
        r["annotations"][aff] = {{x, y}};
        m["records"].push_back(r);
    };
    rec("bad_cat", "umbrella", "ok.ppm", "grasp_hem", 5, 5);
    rec("bad_aff", "towel", "ok.ppm", "launch", 5, 5);
    rec("bad_pt", "towel", "ok.ppm", "grasp_hem", 500, 5);
    rec("twin", "towel", "ok.ppm", "grasp_hem", 5, 5);
    rec("twin", "towel", "ok.ppm", "grasp_hem", 6, 6);
    rec("bad_img", "towel", "gone.ppm", "grasp_hem", 5, 5);
    std::ofstream((dir / "manifest.json").string()) << m.dump(2);
    try {
        load_manifest((dir / "manifest.json").string());
        c.require(false, "invalid manifest was accepted");
    } catch (const ValidationError& e) {
        auto reported = [&](const std::string& id, const std::string& what) {
            for (const auto& item : e.items())
                if (item.find(id) != std::string::npos && item.find(what) != std::string::npos)
                    return true;
            return false;
        };
        c.require(reported("bad_cat", "unknown category"), "unknown category not itemized");
        c.require(reported("bad_aff", "unknown affordance"), "unknown affordance not itemized");
        c.require(reported("bad_pt", "outside image bounds"), "out-of-bounds point not itemized");
        c.require(reported("twin", "duplicate id"), "duplicate id not itemized");
        c.require(reported("bad_img", "image file missing"), "missing image not itemized");
    }
    return c;
}

}  // namespace

int main() {
    struct Entry {
        const char* name;
        std::function<Check()> fn;
    };
    Model* trained = nullptr;
    Dataset fixture_ds;
    SplitSpec fixture_split;
    const std::vector<Entry> entries = {
        {"equation oracles", c1_equation_oracles},
        {"amplify-only invariant", c2_amplify_only},
        {"gradient suite", c3_gradients},
        {"metric oracles", c4_metrics},
        {"prompt conditioning", c5_prompts},
        {"one-shot overfit",
         [&] { return c6_overfit(&trained, &fixture_ds, &fixture_split); }},
        {"ablation structure",
         [&] {
             Check c;
             if (fixture_ds.records.empty()) {
                 c.require(false, "fixture unavailable (overfit criterion failed earlier)");
                 return c;
             }
             return c7_ablations(fixture_ds);
         }},
        {"determinism & persistence",
         [&] {
             Check c;
             if (fixture_ds.records.empty()) {
                 c.require(false, "fixture unavailable (overfit criterion failed earlier)");
                 return c;
             }
             return c8_determinism(fixture_ds, fixture_split);
         }},
        {"data pipeline", c9_data_pipeline},
    };

    bool all_ok = true;
    int i = 0;
    for (const auto& e : entries) {
        ++i;
        const auto t0 = std::chrono::steady_clock::now();
        Check c;
        try {
            c = e.fn();
        } catch (const std::exception& ex) {
            c.ok = false;
            c.detail = std::string("exception: ") + ex.what();
        }
        const double dt =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%d/9] %-26s %s  (%.1fs)%s%s\n", i, e.name, c.ok ? "PASS" : "FAIL", dt,
                    c.ok ? "" : " — ", c.ok ? "" : c.detail.c_str());
        std::fflush(stdout);
        all_ok = all_ok && c.ok;
    }
    std::printf("acceptance: %s\n", all_ok ? "PASS" : "FAIL");
    return all_ok ? 0 : 1;
}

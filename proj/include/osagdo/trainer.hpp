#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "osagdo/autodiff.hpp"
#include "osagdo/core.hpp"
#include "osagdo/data.hpp"
#include "osagdo/decoder.hpp"
#include "osagdo/defosem.hpp"
#include "osagdo/encoders.hpp"
#include "osagdo/metrics.hpp"
#include "osagdo/oekfm.hpp"
#include "osagdo/prompts.hpp"

namespace osagdo {

struct TrainConfig {
    int iterations = 10000;
    double lr = 0.01;  // plain SGD, no momentum / decay / schedule
    std::uint64_t seed = 0;

    bool defosem_on = true;
    bool cocoop_on = true;
    bool oekfm_on = true;
    bool channel_gate_on = true;
    bool spatial_gate_on = true;

    int n_features = 400;
    double oekfm_sigma = 8.0;
    enum class Loss { Bce, Kld };
    Loss loss = Loss::Bce;
    double aux_class_loss_weight = 0.1;

    int decoder_depth = 2;
    double out_temperature = 10.0;
    int m_ctx = 4;
    double tau = 0.07;
    double annotation_sigma = 10.0;

    nlohmann::ordered_json to_json() const {
        return {{"iterations", iterations},
                {"lr", lr},
                {"seed", seed},
                {"defosem_on", defosem_on},
                {"cocoop_on", cocoop_on},
                {"oekfm_on", oekfm_on},
                {"channel_gate_on", channel_gate_on},
                {"spatial_gate_on", spatial_gate_on},
                {"n_features", n_features},
                {"oekfm_sigma", oekfm_sigma},
                {"loss", loss == Loss::Bce ? "bce" : "kld"},
                {"aux_class_loss_weight", aux_class_loss_weight},
                {"decoder_depth", decoder_depth},
                {"out_temperature", out_temperature},
                {"m_ctx", m_ctx},
                {"tau", tau},
                {"annotation_sigma", annotation_sigma}};
    }

    static TrainConfig from_json(const nlohmann::json& j) {
        TrainConfig c;
        c.iterations = j.at("iterations");
        c.lr = j.at("lr");
        c.seed = j.at("seed");
        c.defosem_on = j.at("defosem_on");
        c.cocoop_on = j.at("cocoop_on");
        c.oekfm_on = j.at("oekfm_on");
        c.channel_gate_on = j.at("channel_gate_on");
        c.spatial_gate_on = j.at("spatial_gate_on");
        c.n_features = j.at("n_features");
        c.oekfm_sigma = j.at("oekfm_sigma");
        c.loss = j.at("loss") == "kld" ? Loss::Kld : Loss::Bce;
        c.aux_class_loss_weight = j.at("aux_class_loss_weight");
        c.decoder_depth = j.at("decoder_depth");
        c.out_temperature = j.at("out_temperature");
        c.m_ctx = j.at("m_ctx");
        c.tau = j.at("tau");
        c.annotation_sigma = j.at("annotation_sigma");
        return c;
    }
};

/// All trainable state plus the frozen encoders and the prompt
/// vocabulary. Construction is fully determined by (config, spec,
/// schema): parameter init consumes a Rng(seed) stream.
struct Model {
    TrainConfig cfg;
    EncoderSpec enc_spec;
    DatasetSchema schema;

    ToyVisionEncoder vision;
    ToyTextEncoder text;
    ClassTokenTable table;

    DefoSEMParams defosem;
    PromptParams prompts;
    DecoderParams decoder;

    Model(const TrainConfig& cfg_, const EncoderSpec& spec, const DatasetSchema& schema_)
        : cfg(cfg_),
          enc_spec(spec),
          schema(schema_),
          vision(spec),
          text(spec),
          table(ClassTokenTable::build(schema_.affordances, text)),
          defosem(),
          prompts(),
          decoder() {
        Rng rng(cfg.seed);
        const int side = spec.grid_side();
        defosem = DefoSEMParams(spec.channels, side, side, rng);
        defosem.channel_gate_on = cfg.channel_gate_on;
        defosem.spatial_gate_on = cfg.spatial_gate_on;
        prompts = PromptParams(cfg.m_ctx, spec.token_dim, spec.channels, spec.text_channels, rng);
        prompts.tau = cfg.tau;
        decoder = DecoderParams(cfg.decoder_depth, spec.channels, spec.text_channels, rng);
        decoder.out_temperature = cfg.out_temperature;
    }

    template <class F>
    void for_each_param(F f) {
        defosem.for_each_param(f);
        prompts.for_each_param(f);
        decoder.for_each_param(f);
    }

    /// Forward pass at value level: per-affordance probability maps at
    /// (out_h, out_w), in schema affordance order. No OEKFM here.
    std::vector<Heatmap> predict_raw(const Image& img224, int out_h, int out_w) {
        auto enc = vision.encode(img224);
        ad::Tape t;
        auto f = t.constant(enc.patches.rows, enc.patches.channels, enc.patches.values);
        ad::Tape::Var f_enh = f;
        if (cfg.defosem_on) f_enh = defosem_forward(t, f, nullptr, defosem).out;
        ad::Tape::Var pi = cfg.cocoop_on ? metanet_pi(t, f_enh, prompts) : -1;
        auto seqs = prompt_sequences(t, prompts, table, pi);
        std::vector<ad::Tape::Var> rows;
        for (auto s : seqs) rows.push_back(text.embed_tape(t, s));
        auto f_text = t.concat_rows(rows);
        auto cls = t.constant(1, static_cast<int>(enc.cls.size()), enc.cls);
        auto dec = decode_tape(t, f_enh, f_text, cls, decoder);
        const auto& maps = t.value(dec.grid_maps);
        const int L = enc.patches.rows;
        std::vector<Heatmap> out;
        for (size_t i = 0; i < seqs.size(); ++i) {
            Heatmap grid(enc.patches.grid_h, enc.patches.grid_w, MapKind::Probability);
            std::copy_n(&maps[i * L], L, grid.values.begin());
            out.push_back(resample(grid, out_h, out_w));
        }
        return out;
    }

    /// Full inference for one affordance, OEKFM fusion included when
    /// enabled. Optionally reports M and M' for debugging.
    Heatmap predict(const Image& img224, int affordance_id, Heatmap* region_out = nullptr,
                    Heatmap* weight_out = nullptr) {
        auto maps = predict_raw(img224, img224.height, img224.width);
        Heatmap pred = std::move(maps[affordance_id]);
        if (!cfg.oekfm_on && !region_out && !weight_out) return pred;
        OEKFMConfig ocfg;
        ocfg.n_features = cfg.n_features;
        ocfg.sigma_px = cfg.oekfm_sigma;
        auto kps = detect_keypoints(img224, ocfg);
        Heatmap region = region_map(kps, img224.height, img224.width, ocfg);
        Heatmap weight = normalize_region(region, ocfg);
        if (region_out) *region_out = region;
        if (weight_out) *weight_out = weight;
        if (!cfg.oekfm_on) return pred;
        return fuse(pred, resample(weight, pred.height, pred.width));
    }
};

struct TrainResult {
    std::vector<double> loss_curve;
    std::string rng_state;  // augmentation stream after the last step
};

namespace detail {

struct TrainSample {
    Image image;  // original resolution
    std::vector<std::string> affordances;        // annotated, schema order
    std::map<std::string, Heatmap> dense;        // native-resolution GT
};

inline std::vector<TrainSample> load_train_samples(const Dataset& ds, const SplitSpec& split,
                                                   double sigma) {
    std::vector<TrainSample> samples;
    for (int idx : split.train) {
        const auto& rec = ds.records[static_cast<size_t>(idx)];
        TrainSample s;
        s.image = read_image(rec.image_path);
        for (const auto& aff : ds.schema.affordances) {
            auto it = rec.annotations.find(aff);
            if (it == rec.annotations.end() || it->second.empty()) continue;
            s.affordances.push_back(aff);
            s.dense.emplace(aff, densify(it->second, s.image.height, s.image.width, sigma));
        }
        if (!s.affordances.empty()) samples.push_back(std::move(s));
    }
    if (samples.empty()) throw ValidationError("train: empty or unannotated one-shot split");
    return samples;
}

}  // namespace detail

/// One-shot training loop: one image per iteration (round-robin over
/// the one-shot set), the image's annotated actions rotating per visit.
/// Single-threaded and bitwise deterministic given (seed, config, data).
inline TrainResult train(Model& model, const Dataset& ds, const SplitSpec& split) {
    const TrainConfig& cfg = model.cfg;
    if (cfg.iterations < 1) throw ValidationError("train: iterations must be >= 1");
    auto samples = detail::load_train_samples(ds, split, cfg.annotation_sigma);

    Rng aug_rng(cfg.seed ^ 0xa5a5a5a5a5a5a5a5ULL);
    TrainResult result;
    result.loss_curve.reserve(static_cast<size_t>(cfg.iterations));
    std::vector<int> visit_count(samples.size(), 0);

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        auto& sample = samples[static_cast<size_t>(iter) % samples.size()];
        const int visit = visit_count[static_cast<size_t>(iter) % samples.size()]++;
        const std::string action =
            sample.affordances[static_cast<size_t>(visit) % sample.affordances.size()];

        auto prep = preprocess_train(sample.image, sample.dense, aug_rng, ds.schema);
        // The flip may have swapped this action to its mirror partner.
        const std::string eff_action =
            prep.flipped ? ds.schema.flipped(action) : action;
        const Heatmap& gt = prep.heatmaps.at(eff_action);
        const int action_id = ds.schema.affordance_id(eff_action);

        auto enc = model.vision.encode(prep.image);
        ad::Tape t;
        ParamBinding bound;
        auto f = t.constant(enc.patches.rows, enc.patches.channels, enc.patches.values);
        ad::Tape::Var f_enh = f;
        if (cfg.defosem_on) {
            auto pooled = adaptive_avg_pool(gt, model.defosem.grid_h, model.defosem.grid_w);
            f_enh = defosem_forward(t, f, &pooled, model.defosem, &bound).out;
        }
        ad::Tape::Var pi = cfg.cocoop_on ? metanet_pi(t, f_enh, model.prompts, &bound) : -1;
        auto seqs = prompt_sequences(t, model.prompts, model.table, pi, &bound);
        std::vector<ad::Tape::Var> rows;
        for (auto s : seqs) rows.push_back(model.text.embed_tape(t, s));
        auto f_text = t.concat_rows(rows);
        auto cls = t.constant(1, static_cast<int>(enc.cls.size()), enc.cls);
        auto dec = decode_tape(t, f_enh, f_text, cls, model.decoder, &bound);

        auto map_row = t.row(dec.grid_maps, action_id);
        auto up = t.upsample_bilinear(map_row, enc.patches.grid_h, enc.patches.grid_w, gt.height,
                                      gt.width);
        ad::Tape::Var loss;
        if (cfg.loss == TrainConfig::Loss::Bce) {
            loss = t.bce_loss(up, gt.values);
        } else {
            double sum = 0;
            for (double v : gt.values) sum += v;
            std::vector<double> target(gt.values);
            if (sum > 0)
                for (double& v : target) v /= sum;
            loss = t.kld_loss(up, target);
        }
        if (cfg.aux_class_loss_weight > 0) {
            auto x_feat = visual_class_feature(t, f_enh, model.prompts, &bound);
            auto probs = class_probs_tape(t, x_feat, f_text, cfg.tau);
            loss = t.add(loss, t.scale(t.nll_loss(probs, action_id), cfg.aux_class_loss_weight));
        }

        t.backward(loss);
        for (auto& [param, var] : bound) {
            const auto& g = t.grad(var);
            for (size_t i = 0; i < param->values.size(); ++i) param->values[i] -= cfg.lr * g[i];
        }
        result.loss_curve.push_back(t.value(loss)[0]);
    }
    result.rng_state = aug_rng.serialize();
    return result;
}

/// Per-record, per-annotated-affordance evaluation: eval preprocessing,
/// full inference (default-label DefoSEM path, OEKFM when enabled),
/// then KLD / SIM / NSS against the dense GT.
inline MetricReport evaluate(Model& model, const Dataset& ds, const std::vector<int>& indices) {
    MetricReport report;
    for (int idx : indices) {
        const auto& rec = ds.records[static_cast<size_t>(idx)];
        if (rec.annotations.empty()) {
            report.skipped++;
            continue;
        }
        Image img = read_image(rec.image_path);
        std::map<std::string, Heatmap> dense;
        for (const auto& [aff, pts] : rec.annotations) {
            if (pts.empty()) continue;
            dense.emplace(aff, dense_annotation(rec, aff, model.cfg.annotation_sigma));
        }
        if (dense.empty()) {
            report.skipped++;
            continue;
        }
        auto prep = preprocess_eval(img, dense);
        for (const auto& [aff, gt] : prep.heatmaps) {
            if (gt.max_value() <= 0) {
                report.skipped++;
                continue;
            }
            Heatmap pred = model.predict(prep.image, ds.schema.affordance_id(aff));
            report.add(rec.id + "/" + aff, kld(pred, gt), sim(pred, gt),
                       nss(pred, fixations_from_dense(gt)));
        }
    }
    report.finalize();
    return report;
}

// ---- checkpointing ----

/// Single-file container: magic, u64 little-endian header length, JSON
/// header (config, encoder spec, iteration, rng state, parameter
/// shapes), then raw little-endian f64 parameter blocks in header order.
inline void save_checkpoint(const std::string& path, Model& model, int iteration,
                            const std::string& rng_state) {
    nlohmann::ordered_json header;
    header["format"] = 1;
    header["config"] = model.cfg.to_json();
    header["encoder"] = {{"kind", model.enc_spec.kind == EncoderSpec::Kind::Toy ? "toy" : "adapter"},
                         {"adapter_name", model.enc_spec.adapter_name},
                         {"input_size", model.enc_spec.input_size},
                         {"patch_size", model.enc_spec.patch_size},
                         {"channels", model.enc_spec.channels},
                         {"text_channels", model.enc_spec.text_channels},
                         {"token_dim", model.enc_spec.token_dim},
                         {"seed", model.enc_spec.seed}};
    header["schema"] = {{"version", model.schema.version},
                        {"categories", model.schema.categories},
                        {"affordances", model.schema.affordances}};
    auto pairs = nlohmann::ordered_json::array();
    for (const auto& [l, r] : model.schema.flip_pairs) pairs.push_back({l, r});
    header["schema"]["flip_pairs"] = pairs;
    header["iteration"] = iteration;
    header["rng_state"] = rng_state;
    header["params"] = nlohmann::ordered_json::array();
    model.for_each_param([&](ad::Param& p) {
        header["params"].push_back({{"name", p.name}, {"rows", p.rows}, {"cols", p.cols}});
    });

    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw IoError("cannot write checkpoint: " + path);
        os.write("OSAGCKPT", 8);
        const std::string h = header.dump();
        std::uint64_t len = h.size();
        char lenbuf[8];
        for (int i = 0; i < 8; ++i) lenbuf[i] = static_cast<char>((len >> (8 * i)) & 0xff);
        os.write(lenbuf, 8);
        os.write(h.data(), static_cast<std::streamsize>(h.size()));
        model.for_each_param([&](ad::Param& p) {
            for (double v : p.values) {
                std::uint64_t bits;
                std::memcpy(&bits, &v, 8);
                char buf[8];
                for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
                os.write(buf, 8);
            }
        });
        if (!os) throw IoError("write failed: " + path);
    }
    // Atomic-rename publish: a crashed run never leaves a partial file
    // under the final name.
    std::filesystem::rename(tmp, path);
}

struct Checkpoint {
    Model model;
    int iteration = 0;
    std::string rng_state;
};

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("checkpoint not found: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, "OSAGCKPT", 8) != 0)
        throw ValidationError("not a checkpoint file: " + path);
    char lenbuf[8];
    is.read(lenbuf, 8);
    std::uint64_t len = 0;
    for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(static_cast<unsigned char>(lenbuf[i])) << (8 * i);
    std::string hstr(len, '\0');
    is.read(hstr.data(), static_cast<std::streamsize>(len));
    if (!is) throw ValidationError("truncated checkpoint header: " + path);
    nlohmann::json header = nlohmann::json::parse(hstr);

    TrainConfig cfg = TrainConfig::from_json(header.at("config"));
    EncoderSpec spec;
    const auto& ej = header.at("encoder");
    spec.kind = ej.at("kind") == "toy" ? EncoderSpec::Kind::Toy : EncoderSpec::Kind::Adapter;
    spec.adapter_name = ej.at("adapter_name");
    spec.input_size = ej.at("input_size");
    spec.patch_size = ej.at("patch_size");
    spec.channels = ej.at("channels");
    spec.text_channels = ej.at("text_channels");
    spec.token_dim = ej.at("token_dim");
    spec.seed = ej.at("seed");
    DatasetSchema schema;
    const auto& sj = header.at("schema");
    schema.version = sj.at("version");
    schema.categories = sj.at("categories").get<std::vector<std::string>>();
    schema.affordances = sj.at("affordances").get<std::vector<std::string>>();
    for (const auto& p : sj.at("flip_pairs"))
        schema.flip_pairs.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());

    Checkpoint ckpt{Model(cfg, spec, schema), header.at("iteration"), header.at("rng_state")};
    size_t pi = 0;
    const auto& plist = header.at("params");
    ckpt.model.for_each_param([&](ad::Param& p) {
        const auto& meta = plist.at(pi++);
        if (meta.at("name") != p.name || meta.at("rows") != p.rows || meta.at("cols") != p.cols)
            throw ValidationError("checkpoint parameter layout mismatch at " + p.name);
        for (auto& v : p.values) {
            char buf[8];
            is.read(buf, 8);
            std::uint64_t bits = 0;
            for (int i = 0; i < 8; ++i)
                bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
            std::memcpy(&v, &bits, 8);
        }
    });
    if (!is) throw ValidationError("truncated checkpoint payload: " + path);
    return ckpt;
}

// ---- ablations ----

struct AblationTable {
    std::string axis;
    struct Row {
        std::string label;
        double kld = 0, sim = 0, nss = 0;
    };
    std::vector<Row> rows;

    std::string to_table() const {
        std::string s = "setting\tkld\tsim\tnss\n";
        char buf[160];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof buf, "%s\t%.6f\t%.6f\t%.6f\n", r.label.c_str(), r.kld,
                          r.sim, r.nss);
            s += buf;
        }
        return s;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["axis"] = axis;
        j["rows"] = nlohmann::ordered_json::array();
        for (const auto& r : rows)
            j["rows"].push_back(
                {{"setting", r.label}, {"kld", r.kld}, {"sim", r.sim}, {"nss", r.nss}});
        return j;
    }
};

/// Trains and evaluates one configuration per row of the requested
/// ablation axis ("modules", "n", or "gates").
inline AblationTable ablation_sweep(const TrainConfig& base_cfg, const std::string& axis,
                                    const Dataset& ds, const EncoderSpec& spec) {
    std::vector<std::pair<std::string, TrainConfig>> settings;
    auto with = [&](const std::string& label, auto mutate) {
        TrainConfig c = base_cfg;
        mutate(c);
        settings.emplace_back(label, c);
    };
    if (axis == "modules") {
        with("baseline", [](TrainConfig& c) { c.defosem_on = c.cocoop_on = c.oekfm_on = false; });
        with("+DefoSEM", [](TrainConfig& c) { c.defosem_on = true; c.cocoop_on = c.oekfm_on = false; });
        with("+CoCoOp", [](TrainConfig& c) { c.defosem_on = c.cocoop_on = true; c.oekfm_on = false; });
        with("+OEKFM", [](TrainConfig& c) { c.defosem_on = c.cocoop_on = c.oekfm_on = true; });
    } else if (axis == "n") {
        for (int n : {200, 400, 600, 800, 1000})
            with("n=" + std::to_string(n), [n](TrainConfig& c) { c.n_features = n; });
    } else if (axis == "gates") {
        with("channel", [](TrainConfig& c) { c.channel_gate_on = true; c.spatial_gate_on = false; });
        with("spatial", [](TrainConfig& c) { c.channel_gate_on = false; c.spatial_gate_on = true; });
        with("channel+spatial", [](TrainConfig& c) { c.channel_gate_on = c.spatial_gate_on = true; });
    } else {
        throw ValidationError("unknown ablation axis: " + axis + " (modules|n|gates)");
    }

    AblationTable table;
    table.axis = axis;
    auto split = make_one_shot_split(ds.records);
    const auto& eval_set = split.test.empty() ? split.train : split.test;
    for (auto& [label, cfg] : settings) {
        Model model(cfg, spec, ds.schema);
        train(model, ds, split);
        auto report = evaluate(model, ds, eval_set);
        table.rows.push_back({label, report.macro_kld, report.macro_sim, report.macro_nss});
    }
    return table;
}

}  // namespace osagdo

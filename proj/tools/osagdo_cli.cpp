// Batch CLI for the affordance-grounding pipeline: fixture generation,
// annotation densification, training, evaluation, prediction with
// overlay rendering, and ablation sweeps. Exit codes: 0 success,
// 2 usage/validation error, 1 internal error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "osagdo/trainer.hpp"

using namespace osagdo;
namespace fs = std::filesystem;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = ".";
    std::string manifest;
    std::string encoder = "toy";
    TrainConfig cfg;

    // set by flags; merged over the config file because flags win
    CLI::App* app = nullptr;

    void add_train_flags(CLI::App& sub) {
        app = &sub;
        sub.add_option("--config", config_path, "JSON config file (flags override it)");
        sub.add_option("--out", out_dir, "output directory");
        sub.add_option("--seed", cfg.seed, "RNG seed");
        sub.add_option("--iters", cfg.iterations, "training iterations");
        sub.add_option("--lr", cfg.lr, "SGD learning rate");
        sub.add_option("--n-features", cfg.n_features, "keypoint budget");
        sub.add_flag("--no-defosem", "disable feature enhancement");
        sub.add_flag("--no-cocoop", "disable instance-conditional prompts");
        sub.add_flag("--no-oekfm", "disable keypoint fusion");
        sub.add_flag("--no-channel-gate", "disable the channel gate");
        sub.add_flag("--no-spatial-gate", "disable the spatial gate");
        sub.add_option("--loss", "training loss")->check(CLI::IsMember({"bce", "kld"}));
        sub.add_option("--encoder", encoder, "toy | adapter:<name>");
    }

    /// Resolution order: defaults < config file < explicit flags.
    TrainConfig resolve() {
        TrainConfig out;
        if (!config_path.empty()) {
            std::ifstream is(config_path);
            if (!is) throw IoError("config file not found: " + config_path);
            nlohmann::json j = nlohmann::json::parse(is);
            nlohmann::json full = out.to_json();
            for (auto& [k, v] : j.items()) {
                if (!full.contains(k))
                    throw ValidationError("config file: unknown key '" + k + "'");
                full[k] = v;
            }
            out = TrainConfig::from_json(full);
        }
        auto seen = [&](const char* name) { return app->count(name) > 0; };
        if (seen("--seed")) out.seed = cfg.seed;
        if (seen("--iters")) out.iterations = cfg.iterations;
        if (seen("--lr")) out.lr = cfg.lr;
        if (seen("--n-features")) out.n_features = cfg.n_features;
        if (seen("--no-defosem")) out.defosem_on = false;
        if (seen("--no-cocoop")) out.cocoop_on = false;
        if (seen("--no-oekfm")) out.oekfm_on = false;
        if (seen("--no-channel-gate")) out.channel_gate_on = false;
        if (seen("--no-spatial-gate")) out.spatial_gate_on = false;
        if (seen("--loss"))
            out.loss = app->get_option("--loss")->as<std::string>() == "kld"
                           ? TrainConfig::Loss::Kld
                           : TrainConfig::Loss::Bce;
        return out;
    }

    EncoderSpec encoder_spec() const {
        EncoderSpec spec;
        if (encoder == "toy") return spec;
        if (encoder.rfind("adapter:", 0) == 0) {
            spec.kind = EncoderSpec::Kind::Adapter;
            spec.adapter_name = encoder.substr(8);
            if (spec.adapter_name.empty())
                throw ValidationError("--encoder adapter:<name> needs a name");
            return spec;
        }
        throw ValidationError("--encoder must be 'toy' or 'adapter:<name>', got '" + encoder +
                              "'");
    }
};

void ensure_out_dir(const std::string& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (!fs::is_directory(out)) throw IoError("cannot create output directory: " + out);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write: " + path.string());
    os << text;
}

int run(int argc, char** argv) {
    CLI::App app{"one-shot affordance grounding for deformable objects"};
    app.require_subcommand(1);

    // ---- fixture ----
    auto* fixture = app.add_subcommand("fixture", "generate the synthetic dataset");
    std::uint64_t fixture_seed = 7;
    std::string fixture_out = "fixture";
    fixture->add_option("--seed", fixture_seed, "fixture RNG seed");
    fixture->add_option("--out", fixture_out, "output directory");

    // ---- densify ----
    auto* densify_cmd = app.add_subcommand("densify", "rasterize sparse annotations");
    std::string densify_manifest, densify_out = "dense";
    double densify_sigma = 10.0;
    densify_cmd->add_option("--manifest", densify_manifest, "dataset manifest")->required();
    densify_cmd->add_option("--out", densify_out, "output directory");
    densify_cmd->add_option("--sigma", densify_sigma, "Gaussian sigma in pixels");

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "train on the one-shot split");
    CommonOpts train_opts;
    train_opts.add_train_flags(*train_cmd);
    train_cmd->add_option("--manifest", train_opts.manifest, "dataset manifest")->required();

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string eval_ckpt, eval_manifest, eval_out = ".", eval_split = "test";
    eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint file")->required();
    eval_cmd->add_option("--manifest", eval_manifest, "dataset manifest")->required();
    eval_cmd->add_option("--out", eval_out, "output directory");
    eval_cmd->add_option("--split", eval_split, "records to score")
        ->check(CLI::IsMember({"train", "test", "all"}));

    // ---- predict ----
    auto* predict_cmd = app.add_subcommand("predict", "heatmaps + overlays for one image");
    std::string pred_ckpt, pred_image, pred_out = "predictions";
    std::vector<std::string> pred_affs;
    bool dump_oekfm = false, pred_no_oekfm = false;
    predict_cmd->add_option("--ckpt", pred_ckpt, "checkpoint file")->required();
    predict_cmd->add_option("--image", pred_image, "input image (PPM)")->required();
    predict_cmd->add_option("--out", pred_out, "output directory");
    predict_cmd->add_option("--affordance", pred_affs, "affordance name(s), default all");
    predict_cmd->add_flag("--dump-oekfm", dump_oekfm, "also write M and M' rasters");
    predict_cmd->add_flag("--no-oekfm", pred_no_oekfm, "skip keypoint fusion");

    // ---- ablate ----
    auto* ablate_cmd = app.add_subcommand("ablate", "train/evaluate an ablation axis");
    CommonOpts ablate_opts;
    std::string ablate_axis = "modules";
    ablate_opts.add_train_flags(*ablate_cmd);
    ablate_cmd->add_option("--manifest", ablate_opts.manifest, "dataset manifest")->required();
    ablate_cmd->add_option("--axis", ablate_axis, "modules | n | gates");

    CLI11_PARSE(app, argc, argv);

    if (fixture->parsed()) {
        ensure_out_dir(fixture_out);
        std::cout << make_fixture(fixture_seed, fixture_out) << "\n";
        return 0;
    }

    if (densify_cmd->parsed()) {
        ensure_out_dir(densify_out);
        auto ds = load_manifest(densify_manifest);
        for (const auto& rec : ds.records)
            for (const auto& [aff, pts] : rec.annotations) {
                if (pts.empty()) continue;
                auto [h, w] = read_pnm_size(rec.image_path);
                const std::string name = rec.id + "_" + aff + ".pgm";
                write_pgm16((fs::path(densify_out) / name).string(),
                            densify(pts, h, w, densify_sigma));
                std::cout << name << "\n";
            }
        return 0;
    }

    if (train_cmd->parsed()) {
        ensure_out_dir(train_opts.out_dir);
        TrainConfig cfg = train_opts.resolve();
        auto ds = load_manifest(train_opts.manifest);
        auto split = make_one_shot_split(ds.records);
        Model model(cfg, train_opts.encoder_spec(), ds.schema);
        auto res = train(model, ds, split);
        const fs::path out(train_opts.out_dir);
        save_checkpoint((out / "model.ckpt").string(), model, cfg.iterations, res.rng_state);
        std::string csv = "iteration,loss\n";
        for (size_t i = 0; i < res.loss_curve.size(); ++i)
            csv += std::to_string(i) + "," + std::to_string(res.loss_curve[i]) + "\n";
        write_text(out / "loss.csv", csv);
        write_text(out / "train_config.json", cfg.to_json().dump(2) + "\n");
        std::cout << "checkpoint: " << (out / "model.ckpt").string() << "\n"
                  << "final loss: " << res.loss_curve.back() << "\n";
        return 0;
    }

    if (eval_cmd->parsed()) {
        ensure_out_dir(eval_out);
        auto ckpt = load_checkpoint(eval_ckpt);
        auto ds = load_manifest(eval_manifest);
        auto split = make_one_shot_split(ds.records);
        std::vector<int> indices;
        if (eval_split == "train" || eval_split == "all")
            indices.insert(indices.end(), split.train.begin(), split.train.end());
        if (eval_split == "test" || eval_split == "all")
            indices.insert(indices.end(), split.test.begin(), split.test.end());
        auto report = evaluate(ckpt.model, ds, indices);
        write_text(fs::path(eval_out) / "metrics.json", report.to_json().dump(2) + "\n");
        write_text(fs::path(eval_out) / "metrics.tsv", report.to_table());
        std::cout << report.to_table();
        return 0;
    }

    if (predict_cmd->parsed()) {
        ensure_out_dir(pred_out);
        auto ckpt = load_checkpoint(pred_ckpt);
        Model& model = ckpt.model;
        if (pred_no_oekfm) model.cfg.oekfm_on = false;
        if (pred_affs.empty()) pred_affs = model.schema.affordances;
        for (const auto& aff : pred_affs)
            if (!model.schema.has_affordance(aff)) {
                std::string vocab;
                for (const auto& a : model.schema.affordances) vocab += " " + a;
                throw ValidationError("unknown affordance '" + aff + "'; schema vocabulary:" +
                                      vocab);
            }
        Image img = read_image(pred_image);
        auto prep = preprocess_eval(img, {});
        bool dumped = false;
        for (const auto& aff : pred_affs) {
            Heatmap region, weight;
            Heatmap pred = model.predict(prep.image, model.schema.affordance_id(aff),
                                         dump_oekfm ? &region : nullptr,
                                         dump_oekfm ? &weight : nullptr);
            Heatmap native = resample(pred, img.height, img.width);
            write_pgm16((fs::path(pred_out) / (aff + ".pgm")).string(), native);
            write_ppm((fs::path(pred_out) / (aff + "_overlay.ppm")).string(),
                      render_overlay(img, native));
            if (dump_oekfm && !dumped) {  // keypoints are affordance-independent
                const double mx = region.max_value();
                write_pgm16((fs::path(pred_out) / "oekfm_region.pgm").string(), region,
                            mx > 0 ? 1.0 / mx : 1.0);
                write_pgm16((fs::path(pred_out) / "oekfm_weight.pgm").string(), weight, 0.5);
                dumped = true;
            }
        }
        std::cout << "wrote " << pred_affs.size() << " heatmap(s) + overlay(s) to " << pred_out
                  << "\n";
        return 0;
    }

    if (ablate_cmd->parsed()) {
        ensure_out_dir(ablate_opts.out_dir);
        TrainConfig cfg = ablate_opts.resolve();
        auto ds = load_manifest(ablate_opts.manifest);
        auto table = ablation_sweep(cfg, ablate_axis, ds, ablate_opts.encoder_spec());
        const fs::path out(ablate_opts.out_dir);
        write_text(out / ("ablation_" + ablate_axis + ".json"), table.to_json().dump(2) + "\n");
        write_text(out / ("ablation_" + ablate_axis + ".tsv"), table.to_table());
        std::cout << table.to_table();
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        for (const auto& item : e.items()) std::cerr << "  - " << item << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}

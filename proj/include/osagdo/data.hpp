#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "osagdo/core.hpp"
#include "osagdo/error.hpp"
#include "osagdo/imageio.hpp"
#include "osagdo/rng.hpp"

namespace osagdo {

/// Closed vocabularies plus the left/right affordance pairs that swap
/// under horizontal flip.
struct DatasetSchema {
    int version = 1;
    std::vector<std::string> categories;
    std::vector<std::string> affordances;
    std::vector<std::pair<std::string, std::string>> flip_pairs;

    bool has_category(const std::string& c) const {
        return std::find(categories.begin(), categories.end(), c) != categories.end();
    }
    bool has_affordance(const std::string& a) const {
        return std::find(affordances.begin(), affordances.end(), a) != affordances.end();
    }
    int affordance_id(const std::string& a) const {
        auto it = std::find(affordances.begin(), affordances.end(), a);
        if (it == affordances.end()) throw ValidationError("unknown affordance: " + a);
        return static_cast<int>(it - affordances.begin());
    }
    /// Flip partner of an affordance, or the name itself if unpaired.
    std::string flipped(const std::string& a) const {
        for (const auto& [l, r] : flip_pairs) {
            if (a == l) return r;
            if (a == r) return l;
        }
        return a;
    }
};

/// The 15-category / 15-affordance deformable-object schema.
inline DatasetSchema default_schema() {
    DatasetSchema s;
    s.categories = {"short_sleeve_shirt", "long_sleeve_shirt", "hoodie", "sweater", "vest",
                    "dress", "skirt", "pants", "shorts", "towel",
                    "scarf", "hat", "socks", "gloves", "bag"};
    s.affordances = {"grasp_left_sleeve", "grasp_right_sleeve", "grasp_collar", "grasp_hem",
                     "grasp_waist", "grasp_left_corner", "grasp_right_corner", "grasp_brim",
                     "put_center", "put_hem", "fold_left_side", "fold_right_side",
                     "pull_left_cuff", "pull_right_cuff", "smooth_center"};
    s.flip_pairs = {{"grasp_left_sleeve", "grasp_right_sleeve"},
                    {"grasp_left_corner", "grasp_right_corner"},
                    {"fold_left_side", "fold_right_side"},
                    {"pull_left_cuff", "pull_right_cuff"}};
    return s;
}

struct DatasetRecord {
    std::string id;
    std::string image_path;  // resolved relative to the manifest
    std::string category;
    // affordance -> sparse interaction points (x, y) in original pixels
    std::map<std::string, std::vector<std::pair<double, double>>> annotations;
    // affordance -> cached dense heatmap path (optional)
    std::map<std::string, std::string> dense_paths;
    double coverage = -1;  // optional, unvalidated
};

/// One-shot split: exactly one training record per object category.
struct SplitSpec {
    std::vector<int> train;
    std::vector<int> test;
};

struct ManifestReport {
    int n_records = 0;
    std::map<std::string, int> per_category;
    std::map<std::string, int> per_affordance;
};

struct Dataset {
    DatasetSchema schema;
    std::vector<DatasetRecord> records;
    ManifestReport report;
};

/// Sparse points -> dense heatmap: sum of unit Gaussians, then peak-
/// normalized to 1.0. Empty point list gives the all-zero map.
inline Heatmap densify(const std::vector<std::pair<double, double>>& points, int H, int W,
                       double sigma = 10.0) {
    if (sigma <= 0) throw ValidationError("densify: sigma must be positive");
    Heatmap m(H, W, MapKind::Probability);
    for (const auto& [px, py] : points) {
        if (px < 0 || px >= W || py < 0 || py >= H)
            throw ValidationError("densify: point (" + std::to_string(px) + "," +
                                  std::to_string(py) + ") outside " + std::to_string(W) + "x" +
                                  std::to_string(H));
        const double inv = 1.0 / (2.0 * sigma * sigma);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const double dx = x - px, dy = y - py;
                m.at(y, x) += std::exp(-(dx * dx + dy * dy) * inv);
            }
    }
    const double mx = m.max_value();
    if (mx > 0)
        for (double& v : m.values) v /= mx;
    return m;
}

/// Corner-aligned bilinear image resize.
inline Image resize_image(const Image& img, int H, int W) {
    if (img.height == H && img.width == W) return img;
    Image out(H, W);
    const double sy = H > 1 ? static_cast<double>(img.height - 1) / (H - 1) : 0.0;
    const double sx = W > 1 ? static_cast<double>(img.width - 1) / (W - 1) : 0.0;
    for (int y = 0; y < H; ++y) {
        const double fy = H > 1 ? y * sy : (img.height - 1) * 0.5;
        const int y0 = std::min(static_cast<int>(fy), img.height - 1);
        const int y1 = std::min(y0 + 1, img.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < W; ++x) {
            const double fx = W > 1 ? x * sx : (img.width - 1) * 0.5;
            const int x0 = std::min(static_cast<int>(fx), img.width - 1);
            const int x1 = std::min(x0 + 1, img.width - 1);
            const double wx = fx - x0;
            for (int c = 0; c < 3; ++c) {
                const double v = (1 - wy) * ((1 - wx) * img.at(y0, x0, c) + wx * img.at(y0, x1, c)) +
                                 wy * ((1 - wx) * img.at(y1, x0, c) + wx * img.at(y1, x1, c));
                out.at(y, x, c) = static_cast<std::uint8_t>(v + 0.5);
            }
        }
    }
    return out;
}

inline Image crop_image(const Image& img, int y0, int x0, int H, int W) {
    Image out(H, W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
    return out;
}

inline Heatmap crop_heatmap(const Heatmap& h, int y0, int x0, int H, int W) {
    Heatmap out(H, W, h.kind);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) out.at(y, x) = h.at(y0 + y, x0 + x);
    return out;
}

inline void flip_image(Image& img) {
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width / 2; ++x)
            for (int c = 0; c < 3; ++c)
                std::swap(img.at(y, x, c), img.at(y, img.width - 1 - x, c));
}

inline void flip_heatmap(Heatmap& h) {
    for (int y = 0; y < h.height; ++y)
        for (int x = 0; x < h.width / 2; ++x) std::swap(h.at(y, x), h.at(y, h.width - 1 - x));
}

struct PreprocessedSample {
    Image image;
    std::map<std::string, Heatmap> heatmaps;
    int crop_y = 0, crop_x = 0;
    bool flipped = false;
};

inline constexpr int kResizeSide = 256;
inline constexpr int kCropSide = 224;

/// Training augmentation: resize to 256x256, random 224 crop, random
/// horizontal flip (p=0.5). The same geometric transform hits image and
/// heatmaps; a flip additionally swaps left/right-paired affordance
/// channels. RNG draw order: crop_y, crop_x, flip.
inline PreprocessedSample preprocess_train(const Image& img,
                                           const std::map<std::string, Heatmap>& heatmaps,
                                           Rng& rng, const DatasetSchema& schema) {
    PreprocessedSample out;
    out.crop_y = static_cast<int>(rng.uniform_int(kResizeSide - kCropSide + 1));
    out.crop_x = static_cast<int>(rng.uniform_int(kResizeSide - kCropSide + 1));
    out.flipped = rng.uniform() < 0.5;
    Image resized = resize_image(img, kResizeSide, kResizeSide);
    out.image = crop_image(resized, out.crop_y, out.crop_x, kCropSide, kCropSide);
    if (out.flipped) flip_image(out.image);
    for (const auto& [name, h] : heatmaps) {
        Heatmap r = resample(h, kResizeSide, kResizeSide);
        Heatmap c = crop_heatmap(r, out.crop_y, out.crop_x, kCropSide, kCropSide);
        if (out.flipped) {
            flip_heatmap(c);
            out.heatmaps.emplace(schema.flipped(name), std::move(c));
        } else {
            out.heatmaps.emplace(name, std::move(c));
        }
    }
    return out;
}

/// Deterministic eval preprocessing: resize to 256, center crop 224.
inline PreprocessedSample preprocess_eval(const Image& img,
                                          const std::map<std::string, Heatmap>& heatmaps) {
    PreprocessedSample out;
    out.crop_y = out.crop_x = (kResizeSide - kCropSide) / 2;
    Image resized = resize_image(img, kResizeSide, kResizeSide);
    out.image = crop_image(resized, out.crop_y, out.crop_x, kCropSide, kCropSide);
    for (const auto& [name, h] : heatmaps) {
        Heatmap r = resample(h, kResizeSide, kResizeSide);
        out.heatmaps.emplace(name, crop_heatmap(r, out.crop_y, out.crop_x, kCropSide, kCropSide));
    }
    return out;
}

/// Parses and validates a manifest. Any violation aborts the load with
/// the itemized list (no partial result).
inline Dataset load_manifest(const std::string& path) {
    namespace fs = std::filesystem;
    std::ifstream is(path);
    if (!is) throw IoError("manifest not found: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("manifest is not valid JSON: ") + e.what());
    }
    std::vector<std::string> errors;
    Dataset ds;
    try {
        ds.schema.version = j.at("schema_version").get<int>();
        ds.schema.categories = j.at("categories").get<std::vector<std::string>>();
        ds.schema.affordances = j.at("affordances").get<std::vector<std::string>>();
        for (const auto& p : j.at("flip_pairs"))
            ds.schema.flip_pairs.emplace_back(p.at(0).get<std::string>(),
                                              p.at(1).get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("manifest header malformed: ") + e.what());
    }
    for (const auto& [l, r] : ds.schema.flip_pairs) {
        if (!ds.schema.has_affordance(l)) errors.push_back("flip pair names unknown affordance '" + l + "'");
        if (!ds.schema.has_affordance(r)) errors.push_back("flip pair names unknown affordance '" + r + "'");
    }

    const fs::path base = fs::path(path).parent_path();
    std::set<std::string> seen_ids;
    for (const auto& rj : j.at("records")) {
        DatasetRecord rec;
        try {
            rec.id = rj.at("id").get<std::string>();
            rec.category = rj.at("category").get<std::string>();
            rec.image_path = (base / rj.at("image").get<std::string>()).string();
            for (const auto& [aff, pts] : rj.at("annotations").items()) {
                auto& v = rec.annotations[aff];
                for (const auto& p : pts)
                    v.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
            }
            if (rj.contains("dense"))
                for (const auto& [aff, dp] : rj.at("dense").items())
                    rec.dense_paths[aff] = (base / dp.get<std::string>()).string();
            if (rj.contains("coverage")) rec.coverage = rj.at("coverage").get<double>();
        } catch (const nlohmann::json::exception& e) {
            errors.push_back("record malformed: " + std::string(e.what()));
            continue;
        }
        if (!seen_ids.insert(rec.id).second)
            errors.push_back("record " + rec.id + ": duplicate id");
        if (!ds.schema.has_category(rec.category))
            errors.push_back("record " + rec.id + ": unknown category '" + rec.category + "'");
        int img_h = -1, img_w = -1;
        if (!fs::exists(rec.image_path)) {
            errors.push_back("record " + rec.id + ": image file missing: " + rec.image_path);
        } else {
            try {
                std::tie(img_h, img_w) = read_pnm_size(rec.image_path);
            } catch (const IoError& e) {
                errors.push_back("record " + rec.id + ": " + e.what());
            }
        }
        for (const auto& [aff, pts] : rec.annotations) {
            if (!ds.schema.has_affordance(aff)) {
                errors.push_back("record " + rec.id + ": unknown affordance '" + aff + "'");
                continue;
            }
            if (img_h > 0)
                for (const auto& [x, y] : pts)
                    if (x < 0 || x >= img_w || y < 0 || y >= img_h)
                        errors.push_back("record " + rec.id + ": point (" + std::to_string(x) +
                                         "," + std::to_string(y) + ") outside image bounds");
        }
        ds.records.push_back(std::move(rec));
    }
    if (!errors.empty()) {
        std::string head = "manifest validation failed (" + std::to_string(errors.size()) +
                           " violation(s)); first: " + errors.front();
        throw ValidationError(head, errors);
    }
    ds.report.n_records = static_cast<int>(ds.records.size());
    for (const auto& r : ds.records) {
        ds.report.per_category[r.category]++;
        for (const auto& [aff, pts] : r.annotations) ds.report.per_affordance[aff]++;
    }
    return ds;
}

/// Dense GT for one record/affordance: cached raster if present, else
/// densified from the sparse points at the image's native size.
inline Heatmap dense_annotation(const DatasetRecord& rec, const std::string& affordance,
                                double sigma = 10.0) {
    auto dp = rec.dense_paths.find(affordance);
    if (dp != rec.dense_paths.end() && std::filesystem::exists(dp->second))
        return read_pgm16(dp->second);
    auto it = rec.annotations.find(affordance);
    if (it == rec.annotations.end())
        throw ValidationError("record " + rec.id + " has no annotation for " + affordance);
    auto [h, w] = read_pnm_size(rec.image_path);
    return densify(it->second, h, w, sigma);
}

/// First record (manifest order) of each category trains; the rest test.
inline SplitSpec make_one_shot_split(const std::vector<DatasetRecord>& records) {
    SplitSpec split;
    std::set<std::string> taken;
    for (size_t i = 0; i < records.size(); ++i) {
        if (taken.insert(records[i].category).second)
            split.train.push_back(static_cast<int>(i));
        else
            split.test.push_back(static_cast<int>(i));
    }
    if (split.train.empty()) throw ValidationError("one-shot split: no records");
    return split;
}

// ---- synthetic fixture ----

namespace detail {

inline bool point_in_polygon(double x, double y,
                             const std::vector<std::pair<double, double>>& poly) {
    bool inside = false;
    for (size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const auto [xi, yi] = poly[i];
        const auto [xj, yj] = poly[j];
        if ((yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi) inside = !inside;
    }
    return inside;
}

}  // namespace detail

/// Generates a desk-scale synthetic dataset: 3 categories x 3 images of
/// polygon "garment" silhouettes on textured backgrounds, annotated at
/// silhouette landmarks. Returns the manifest path.
inline std::string make_fixture(std::uint64_t seed, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    {
        std::ofstream probe(fs::path(out_dir) / ".write_probe");
        if (!probe) throw IoError("fixture output directory is not writable: " + out_dir);
    }
    fs::remove(fs::path(out_dir) / ".write_probe", ec);

    const DatasetSchema schema = default_schema();
    const int side = 256;
    nlohmann::ordered_json manifest;
    manifest["schema_version"] = schema.version;
    manifest["categories"] = schema.categories;
    manifest["affordances"] = schema.affordances;
    manifest["flip_pairs"] = nlohmann::json::array();
    for (const auto& [l, r] : schema.flip_pairs)
        manifest["flip_pairs"].push_back({l, r});
    manifest["records"] = nlohmann::ordered_json::array();

    struct Spec {
        std::string category;
        // base polygon in unit coordinates (x, y)
        std::vector<std::pair<double, double>> poly;
        // affordance -> landmark (vertex index, or -1 for centroid)
        std::vector<std::pair<std::string, int>> affs;
        std::array<int, 3> color;
    };
    const std::vector<Spec> specs = {
        {"towel",
         {{0.2, 0.25}, {0.8, 0.25}, {0.8, 0.75}, {0.2, 0.75}},
         {{"grasp_right_corner", 1}, {"grasp_left_corner", 0}, {"put_center", -1}},
         {60, 120, 200}},
        {"shorts",
         {{0.3, 0.2}, {0.7, 0.2}, {0.8, 0.75}, {0.58, 0.75}, {0.5, 0.45}, {0.42, 0.75}, {0.2, 0.75}},
         {{"grasp_waist", 0}, {"put_hem", 2}, {"smooth_center", -1}},
         {200, 90, 60}},
        {"short_sleeve_shirt",
         {{0.35, 0.2}, {0.65, 0.2}, {0.85, 0.35}, {0.75, 0.5}, {0.65, 0.42}, {0.65, 0.8},
          {0.35, 0.8}, {0.35, 0.42}, {0.25, 0.5}, {0.15, 0.35}},
         {{"grasp_right_sleeve", 2}, {"grasp_left_sleeve", 9}, {"grasp_collar", 0}},
         {70, 170, 90}},
    };

    for (size_t ci = 0; ci < specs.size(); ++ci) {
        const auto& sp = specs[ci];
        for (int k = 0; k < 3; ++k) {
            Rng rng(seed * 1000003ULL + ci * 101ULL + k);
            // jittered copy of the base polygon, in pixels
            std::vector<std::pair<double, double>> poly;
            const double scale = 0.85 + 0.3 * rng.uniform();
            const double ox = side * (0.5 + 0.08 * (rng.uniform() - 0.5));
            const double oy = side * (0.5 + 0.08 * (rng.uniform() - 0.5));
            for (const auto& [ux, uy] : sp.poly) {
                const double jx = 4.0 * (rng.uniform() - 0.5);
                const double jy = 4.0 * (rng.uniform() - 0.5);
                poly.emplace_back(ox + (ux - 0.5) * side * scale + jx,
                                  oy + (uy - 0.5) * side * scale + jy);
            }
            double cx = 0, cy = 0;
            for (const auto& [px, py] : poly) cx += px, cy += py;
            cx /= poly.size(), cy /= poly.size();

            // Garment details: each landmark carries a distinctive marking
            // (cuff, tag, printed motif) so affordance regions are visually
            // identifiable. Mirror-paired affordances share a marking color
            // so horizontal flips stay appearance-consistent.
            static const std::map<std::string, std::array<int, 3>> accents = {
                {"grasp_left_corner", {230, 50, 50}},  {"grasp_right_corner", {230, 50, 50}},
                {"put_center", {245, 220, 60}},        {"grasp_waist", {50, 220, 220}},
                {"put_hem", {235, 60, 235}},           {"smooth_center", {60, 235, 60}},
                {"grasp_collar", {250, 150, 40}},      {"grasp_left_sleeve", {150, 60, 235}},
                {"grasp_right_sleeve", {150, 60, 235}}};
            struct Mark {
                double x, y;
                std::array<int, 3> color;
            };
            std::vector<Mark> marks;
            std::vector<std::pair<std::string, std::pair<double, double>>> landmarks;
            for (const auto& [aff, vi] : sp.affs) {
                double px = vi < 0 ? cx : poly[vi].first;
                double py = vi < 0 ? cy : poly[vi].second;
                px = std::clamp(px, 0.0, side - 1.0);
                py = std::clamp(py, 0.0, side - 1.0);
                landmarks.emplace_back(aff, std::make_pair(px, py));
                marks.push_back({px, py, accents.at(aff)});
            }
            const double mark_r = 13.0;

            Image img(side, side);
            for (int y = 0; y < side; ++y)
                for (int x = 0; x < side; ++x) {
                    const bool inside = detail::point_in_polygon(x + 0.5, y + 0.5, poly);
                    const Mark* mark = nullptr;
                    for (const auto& m : marks) {
                        const double dx = x - m.x, dy = y - m.y;
                        if (dx * dx + dy * dy <= mark_r * mark_r) {
                            mark = &m;
                            break;
                        }
                    }
                    for (int c = 0; c < 3; ++c) {
                        const double noise = 28.0 * (rng.uniform() - 0.5);
                        // fabric shading: per-channel gradients give interior
                        // patches a position-dependent appearance
                        const double shade =
                            c == 0   ? 140.0 * (static_cast<double>(x) / side - 0.5)
                            : c == 1 ? 140.0 * (static_cast<double>(y) / side - 0.5)
                                     : 70.0 * std::sin(0.12 * x) * std::sin(0.12 * y);
                        const double base =
                            mark     ? static_cast<double>(mark->color[static_cast<size_t>(c)])
                            : inside ? sp.color[static_cast<size_t>(c)] + shade
                                     : 170.0 + 20.0 * std::sin(0.18 * x) * std::cos(0.18 * y);
                        img.at(y, x, c) = static_cast<std::uint8_t>(
                            std::clamp(base + noise, 0.0, 255.0));
                    }
                }
            const std::string rec_id = sp.category + "_" + std::to_string(k);
            const std::string img_name = rec_id + ".ppm";
            write_ppm((fs::path(out_dir) / img_name).string(), img);

            nlohmann::ordered_json annotations;
            for (const auto& [aff, pt] : landmarks) annotations[aff] = {{pt.first, pt.second}};
            nlohmann::ordered_json rec;
            rec["id"] = rec_id;
            rec["image"] = img_name;
            rec["category"] = sp.category;
            rec["annotations"] = annotations;
            manifest["records"].push_back(rec);
        }
    }
    const std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();
    std::ofstream os(manifest_path);
    if (!os) throw IoError("cannot write manifest: " + manifest_path);
    os << manifest.dump(2) << "\n";
    return manifest_path;
}

}  // namespace osagdo

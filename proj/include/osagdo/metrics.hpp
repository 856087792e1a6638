#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "osagdo/core.hpp"
#include "osagdo/error.hpp"

#include <nlohmann/json.hpp>

namespace osagdo {

namespace detail {
inline std::vector<double> to_distribution(const Heatmap& h, const char* who) {
    double sum = 0;
    for (double v : h.values) {
        if (v < 0) throw ValidationError(std::string(who) + ": negative value");
        sum += v;
    }
    if (sum <= 0) throw ValidationError(std::string(who) + ": all-zero map");
    std::vector<double> d(h.values);
    for (double& v : d) v /= sum;
    return d;
}
}  // namespace detail

/// KL divergence of the GT distribution from the prediction, both
/// normalized to sum 1. Zero-mass GT cells contribute nothing.
inline double kld(const Heatmap& pred, const Heatmap& gt) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw ShapeError("kld: shape mismatch");
    constexpr double eps = 1e-12;
    const auto p = detail::to_distribution(pred, "kld(pred)");
    const auto g = detail::to_distribution(gt, "kld(gt)");
    double s = 0;
    for (size_t i = 0; i < p.size(); ++i)
        if (g[i] > 0) s += g[i] * std::log(g[i] / (p[i] + eps) + eps);
    return s;
}

/// Histogram intersection of the two normalized maps, in [0,1].
inline double sim(const Heatmap& pred, const Heatmap& gt) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw ShapeError("sim: shape mismatch");
    const auto p = detail::to_distribution(pred, "sim(pred)");
    const auto g = detail::to_distribution(gt, "sim(gt)");
    double s = 0;
    for (size_t i = 0; i < p.size(); ++i) s += std::min(p[i], g[i]);
    return s;
}

/// Normalized scanpath saliency: standardize pred (population std) and
/// average over fixation cells. Constant pred returns 0 by convention.
inline double nss(const Heatmap& pred, const Heatmap& fixations) {
    if (pred.height != fixations.height || pred.width != fixations.width)
        throw ShapeError("nss: shape mismatch");
    double n_fix = 0;
    for (double v : fixations.values) n_fix += v > 0 ? 1.0 : 0.0;
    if (n_fix == 0) throw ValidationError("nss: no fixation cells");
    double lo = pred.values[0], hi = pred.values[0];
    for (double v : pred.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (lo == hi) return 0.0;
    const double n = static_cast<double>(pred.values.size());
    double mean = 0;
    for (double v : pred.values) mean += v;
    mean /= n;
    double var = 0;
    for (double v : pred.values) var += (v - mean) * (v - mean);
    var /= n;
    if (var == 0) return 0.0;
    const double sd = std::sqrt(var);
    double s = 0;
    for (size_t i = 0; i < pred.values.size(); ++i)
        if (fixations.values[i] > 0) s += (pred.values[i] - mean) / sd;
    return s / n_fix;
}

/// Marks cells with gt >= threshold * max(gt); the argmax cell is
/// always marked. Binary inputs pass through unchanged at the default
/// threshold.
inline Heatmap fixations_from_dense(const Heatmap& gt, double threshold = 0.5) {
    const double mx = gt.max_value();
    if (mx <= 0) throw ValidationError("fixations_from_dense: all-zero gt");
    Heatmap out(gt.height, gt.width, MapKind::Probability);
    const double cut = threshold * mx;
    for (size_t i = 0; i < gt.values.size(); ++i)
        out.values[i] = gt.values[i] >= cut ? 1.0 : 0.0;
    // Guard against threshold > 1 degenerating to an empty set.
    bool any = false;
    for (double v : out.values) any = any || v > 0;
    if (!any)
        for (size_t i = 0; i < gt.values.size(); ++i)
            if (gt.values[i] == mx) out.values[i] = 1.0;
    return out;
}

/// Per-image metric rows plus macro averages (plain arithmetic mean).
struct MetricReport {
    struct Row {
        std::string id;  // "<record>/<affordance>"
        double kld = 0, sim = 0, nss = 0;
    };
    std::vector<Row> rows;
    int skipped = 0;  // records without usable GT

    double macro_kld = 0, macro_sim = 0, macro_nss = 0;

    void add(const std::string& id, double k, double s, double n) {
        rows.push_back({id, k, s, n});
    }

    void finalize() {
        macro_kld = macro_sim = macro_nss = 0;
        if (rows.empty()) return;
        for (const auto& r : rows) {
            macro_kld += r.kld;
            macro_sim += r.sim;
            macro_nss += r.nss;
        }
        macro_kld /= rows.size();
        macro_sim /= rows.size();
        macro_nss /= rows.size();
    }

    std::string to_table() const {
        std::string s = "id\tkld\tsim\tnss\n";
        char buf[128];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof buf, "%s\t%.6f\t%.6f\t%.6f\n", r.id.c_str(), r.kld, r.sim,
                          r.nss);
            s += buf;
        }
        std::snprintf(buf, sizeof buf, "macro\t%.6f\t%.6f\t%.6f\n", macro_kld, macro_sim,
                      macro_nss);
        s += buf;
        return s;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["macro"] = {{"kld", macro_kld}, {"sim", macro_sim}, {"nss", macro_nss}};
        j["skipped"] = skipped;
        j["rows"] = nlohmann::ordered_json::array();
        for (const auto& r : rows)
            j["rows"].push_back(
                {{"id", r.id}, {"kld", r.kld}, {"sim", r.sim}, {"nss", r.nss}});
        return j;
    }
};

}  // namespace osagdo

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "osagdo/error.hpp"

namespace osagdo::ad {

/// Reverse-mode tape over dense row-major matrices (f64).
///
/// Nodes are referenced by index. Ops append a node holding the forward
/// value plus a closure that scatters the node's gradient back into its
/// parents. backward(loss) seeds d(loss)=1 and replays closures in
/// reverse. Only nodes created via variable() are meant to receive
/// gradients callers read back.
class Tape {
public:
    using Var = int;

    struct Node {
        int rows = 0, cols = 0;
        std::vector<double> val;
        std::vector<double> grad;
        std::function<void()> backward;
    };

    Var constant(int rows, int cols, std::vector<double> v) {
        return push(rows, cols, std::move(v));
    }
    Var variable(int rows, int cols, std::vector<double> v) {
        return push(rows, cols, std::move(v));
    }
    Var scalar(double v) { return push(1, 1, {v}); }

    int rows(Var a) const { return nodes_[a].rows; }
    int cols(Var a) const { return nodes_[a].cols; }
    const std::vector<double>& value(Var a) const { return nodes_[a].val; }
    const std::vector<double>& grad(Var a) const { return nodes_[a].grad; }

    // ---- elementwise ----

    Var add(Var a, Var b) {
        same_shape(a, b, "add");
        auto out = map2(a, b, [](double x, double y) { return x + y; });
        nodes_[out].backward = [this, a, b, out] {
            axpy(nodes_[out].grad, nodes_[a].grad, 1.0);
            axpy(nodes_[out].grad, nodes_[b].grad, 1.0);
        };
        return out;
    }

    Var sub(Var a, Var b) {
        same_shape(a, b, "sub");
        auto out = map2(a, b, [](double x, double y) { return x - y; });
        nodes_[out].backward = [this, a, b, out] {
            axpy(nodes_[out].grad, nodes_[a].grad, 1.0);
            axpy(nodes_[out].grad, nodes_[b].grad, -1.0);
        };
        return out;
    }

    Var mul(Var a, Var b) {
        same_shape(a, b, "mul");
        auto out = map2(a, b, [](double x, double y) { return x * y; });
        nodes_[out].backward = [this, a, b, out] {
            auto& g = nodes_[out].grad;
            for (size_t i = 0; i < g.size(); ++i) {
                nodes_[a].grad[i] += g[i] * nodes_[b].val[i];
                nodes_[b].grad[i] += g[i] * nodes_[a].val[i];
            }
        };
        return out;
    }

    Var scale(Var a, double s) {
        auto out = map1(a, [s](double x) { return s * x; });
        nodes_[out].backward = [this, a, out, s] { axpy(nodes_[out].grad, nodes_[a].grad, s); };
        return out;
    }

    Var add_scalar(Var a, double s) {
        auto out = map1(a, [s](double x) { return x + s; });
        nodes_[out].backward = [this, a, out] { axpy(nodes_[out].grad, nodes_[a].grad, 1.0); };
        return out;
    }

    Var sigmoid(Var a) {
        auto out = map1(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
        nodes_[out].backward = [this, a, out] {
            auto& g = nodes_[out].grad;
            for (size_t i = 0; i < g.size(); ++i) {
                const double y = nodes_[out].val[i];
                nodes_[a].grad[i] += g[i] * y * (1.0 - y);
            }
        };
        return out;
    }

    Var relu(Var a) {
        auto out = map1(a, [](double x) { return x > 0 ? x : 0.0; });
        nodes_[out].backward = [this, a, out] {
            auto& g = nodes_[out].grad;
            for (size_t i = 0; i < g.size(); ++i)
                if (nodes_[a].val[i] > 0) nodes_[a].grad[i] += g[i];
        };
        return out;
    }

    Var tanh_(Var a) {
        auto out = map1(a, [](double x) { return std::tanh(x); });
        nodes_[out].backward = [this, a, out] {
            auto& g = nodes_[out].grad;
            for (size_t i = 0; i < g.size(); ++i) {
                const double y = nodes_[out].val[i];
                nodes_[a].grad[i] += g[i] * (1.0 - y * y);
            }
        };
        return out;
    }

    // ---- matrix ops ----

    /// a (m x k) * b (k x n)
    Var matmul(Var a, Var b) {
        const int m = nodes_[a].rows, k = nodes_[a].cols, n = nodes_[b].cols;
        if (nodes_[b].rows != k) throw ShapeError("matmul: inner dims differ");
        std::vector<double> v(static_cast<size_t>(m) * n, 0.0);
        for (int i = 0; i < m; ++i)
            for (int p = 0; p < k; ++p) {
                const double av = nodes_[a].val[i * k + p];
                for (int j = 0; j < n; ++j) v[i * n + j] += av * nodes_[b].val[p * n + j];
            }
        auto out = push(m, n, std::move(v));
        nodes_[out].backward = [this, a, b, out, m, k, n] {
            const auto& g = nodes_[out].grad;
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    const double gv = g[i * n + j];
                    if (gv == 0.0) continue;
                    for (int p = 0; p < k; ++p) {
                        nodes_[a].grad[i * k + p] += gv * nodes_[b].val[p * n + j];
                        nodes_[b].grad[p * n + j] += gv * nodes_[a].val[i * k + p];
                    }
                }
        };
        return out;
    }

    /// a (m x k) * b^T, b is (n x k)
    Var matmul_nt(Var a, Var b) {
        const int m = nodes_[a].rows, k = nodes_[a].cols, n = nodes_[b].rows;
        if (nodes_[b].cols != k) throw ShapeError("matmul_nt: inner dims differ");
        std::vector<double> v(static_cast<size_t>(m) * n, 0.0);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                double s = 0;
                for (int p = 0; p < k; ++p) s += nodes_[a].val[i * k + p] * nodes_[b].val[j * k + p];
                v[i * n + j] = s;
            }
        auto out = push(m, n, std::move(v));
        nodes_[out].backward = [this, a, b, out, m, k, n] {
            const auto& g = nodes_[out].grad;
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    const double gv = g[i * n + j];
                    if (gv == 0.0) continue;
                    for (int p = 0; p < k; ++p) {
                        nodes_[a].grad[i * k + p] += gv * nodes_[b].val[j * k + p];
                        nodes_[b].grad[j * k + p] += gv * nodes_[a].val[i * k + p];
                    }
                }
        };
        return out;
    }

    /// Broadcast multiply: a (m x n) * r (1 x n) per column.
    Var mul_rowvec(Var a, Var r) {
        const int m = nodes_[a].rows, n = nodes_[a].cols;
        if (nodes_[r].rows != 1 || nodes_[r].cols != n) throw ShapeError("mul_rowvec shape");
        std::vector<double> v(nodes_[a].val);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) v[i * n + j] *= nodes_[r].val[j];
        auto out = push(m, n, std::move(v));
        nodes_[out].backward = [this, a, r, out, m, n] {
            const auto& g = nodes_[out].grad;
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    nodes_[a].grad[i * n + j] += g[i * n + j] * nodes_[r].val[j];
                    nodes_[r].grad[j] += g[i * n + j] * nodes_[a].val[i * n + j];
                }
        };
        return out;
    }

    /// Broadcast add: a (m x n) + r (1 x n) per column (bias add).
    Var add_rowvec(Var a, Var r) {
        const int m = nodes_[a].rows, n = nodes_[a].cols;
        if (nodes_[r].rows != 1 || nodes_[r].cols != n) throw ShapeError("add_rowvec shape");
        std::vector<double> v(nodes_[a].val);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) v[i * n + j] += nodes_[r].val[j];
        auto out = push(m, n, std::move(v));
        nodes_[out].backward = [this, a, r, out, m, n] {
            const auto& g = nodes_[out].grad;
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    nodes_[a].grad[i * n + j] += g[i * n + j];
                    nodes_[r].grad[j] += g[i * n + j];
                }
        };
        return out;
    }

    /// Broadcast multiply: a (m x n) * c (m x 1) per row.
    Var mul_colvec(Var a, Var c) {
        const int m = nodes_[a].rows, n = nodes_[a].cols;
        if (nodes_[c].rows != m || nodes_[c].cols != 1) throw ShapeError("mul_colvec shape");
        std::vector<double> v(nodes_[a].val);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) v[i * n + j] *= nodes_[c].val[i];
        auto out = push(m, n, std::move(v));
        nodes_[out].backward = [this, a, c, out, m, n] {
            const auto& g = nodes_[out].grad;
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    nodes_[a].grad[i * n + j] += g[i * n + j] * nodes_[c].val[i];
                    nodes_[c].grad[i] += g[i * n + j] * nodes_[a].val[i * n + j];
                }
        };
        return out;
    }

    Var concat_cols(Var a, Var b) {
        const int m = nodes_[a].rows, n1 = nodes_[a].cols, n2 = nodes_[b].cols;
        if (nodes_[b].rows != m) throw ShapeError("concat_cols: row counts differ");
        std::vector<double> v(static_cast<size_t>(m) * (n1 + n2));
        for (int i = 0; i < m; ++i) {
            std::copy_n(&nodes_[a].val[i * n1], n1, &v[i * (n1 + n2)]);
            std::copy_n(&nodes_[b].val[i * n2], n2, &v[i * (n1 + n2) + n1]);
        }
        auto out = push(m, n1 + n2, std::move(v));
        nodes_[out].backward = [this, a, b, out, m, n1, n2] {
            const auto& g = nodes_[out].grad;
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < n1; ++j) nodes_[a].grad[i * n1 + j] += g[i * (n1 + n2) + j];
                for (int j = 0; j < n2; ++j) nodes_[b].grad[i * n2 + j] += g[i * (n1 + n2) + n1 + j];
            }
        };
        return out;
    }

    /// Stack rows of equal width into one matrix.
    Var concat_rows(const std::vector<Var>& parts) {
        if (parts.empty()) throw ShapeError("concat_rows: empty");
        const int n = nodes_[parts[0]].cols;
        int m = 0;
        for (Var p : parts) {
            if (nodes_[p].cols != n) throw ShapeError("concat_rows: widths differ");
            m += nodes_[p].rows;
        }
        std::vector<double> v;
        v.reserve(static_cast<size_t>(m) * n);
        for (Var p : parts) v.insert(v.end(), nodes_[p].val.begin(), nodes_[p].val.end());
        auto out = push(m, n, std::move(v));
        nodes_[out].backward = [this, parts, out] {
            size_t off = 0;
            for (Var p : parts) {
                auto& gp = nodes_[p].grad;
                for (size_t i = 0; i < gp.size(); ++i) gp[i] += nodes_[out].grad[off + i];
                off += gp.size();
            }
        };
        return out;
    }

    /// Column slice [c0, c1).
    Var cols(Var a, int c0, int c1) {
        const int m = nodes_[a].rows, n = nodes_[a].cols, w = c1 - c0;
        if (c0 < 0 || c1 > n || w <= 0) throw ShapeError("cols: bad slice");
        std::vector<double> v(static_cast<size_t>(m) * w);
        for (int i = 0; i < m; ++i) std::copy_n(&nodes_[a].val[i * n + c0], w, &v[i * w]);
        auto out = push(m, w, std::move(v));
        nodes_[out].backward = [this, a, out, m, n, c0, w] {
            const auto& g = nodes_[out].grad;
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < w; ++j) nodes_[a].grad[i * n + c0 + j] += g[i * w + j];
        };
        return out;
    }

    Var row(Var a, int r) {
        const int n = nodes_[a].cols;
        if (r < 0 || r >= nodes_[a].rows) throw ShapeError("row: out of range");
        std::vector<double> v(nodes_[a].val.begin() + static_cast<size_t>(r) * n,
                              nodes_[a].val.begin() + static_cast<size_t>(r + 1) * n);
        auto out = push(1, n, std::move(v));
        nodes_[out].backward = [this, a, out, r, n] {
            for (int j = 0; j < n; ++j) nodes_[a].grad[r * n + j] += nodes_[out].grad[j];
        };
        return out;
    }

    /// Mean over rows: (m x n) -> (1 x n).
    Var mean_rows(Var a) {
        const int m = nodes_[a].rows, n = nodes_[a].cols;
        std::vector<double> v(n, 0.0);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) v[j] += nodes_[a].val[i * n + j];
        for (int j = 0; j < n; ++j) v[j] /= m;
        auto out = push(1, n, std::move(v));
        nodes_[out].backward = [this, a, out, m, n] {
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) nodes_[a].grad[i * n + j] += nodes_[out].grad[j] / m;
        };
        return out;
    }

    Var softmax_rows(Var a) {
        const int m = nodes_[a].rows, n = nodes_[a].cols;
        std::vector<double> v(nodes_[a].val);
        for (int i = 0; i < m; ++i) {
            double mx = -1e300;
            for (int j = 0; j < n; ++j) mx = std::max(mx, v[i * n + j]);
            double s = 0;
            for (int j = 0; j < n; ++j) s += (v[i * n + j] = std::exp(v[i * n + j] - mx));
            for (int j = 0; j < n; ++j) v[i * n + j] /= s;
        }
        auto out = push(m, n, std::move(v));
        nodes_[out].backward = [this, a, out, m, n] {
            const auto& g = nodes_[out].grad;
            const auto& y = nodes_[out].val;
            for (int i = 0; i < m; ++i) {
                double dot = 0;
                for (int j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
                for (int j = 0; j < n; ++j)
                    nodes_[a].grad[i * n + j] += y[i * n + j] * (g[i * n + j] - dot);
            }
        };
        return out;
    }

    /// L2-normalize every row; rows must be nonzero.
    Var l2_normalize_rows(Var a) {
        const int m = nodes_[a].rows, n = nodes_[a].cols;
        std::vector<double> v(nodes_[a].val);
        std::vector<double> norms(m);
        for (int i = 0; i < m; ++i) {
            double s = 0;
            for (int j = 0; j < n; ++j) s += v[i * n + j] * v[i * n + j];
            // epsilon keeps degenerate (all-equal-feature) rows finite
            const double nr = std::max(std::sqrt(s), 1e-12);
            norms[i] = nr;
            for (int j = 0; j < n; ++j) v[i * n + j] /= nr;
        }
        auto out = push(m, n, std::move(v));
        nodes_[out].backward = [this, a, out, m, n, norms] {
            const auto& g = nodes_[out].grad;
            const auto& y = nodes_[out].val;
            for (int i = 0; i < m; ++i) {
                double dot = 0;
                for (int j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
                for (int j = 0; j < n; ++j)
                    nodes_[a].grad[i * n + j] += (g[i * n + j] - dot * y[i * n + j]) / norms[i];
            }
        };
        return out;
    }

    /// 3x3 conv over an (h x w) grid, C input channels -> 1 output
    /// channel, zero padding. a is (h*w x C); kernel is (1 x 9C) laid
    /// out [(dy*3+dx)*C + c]; bias is (1 x 1). Output (h*w x 1).
    Var conv3x3(Var a, Var kernel, Var bias, int h, int w) {
        const int C = nodes_[a].cols;
        if (nodes_[a].rows != h * w) throw ShapeError("conv3x3: grid mismatch");
        if (nodes_[kernel].cols != 9 * C) throw ShapeError("conv3x3: kernel size");
        std::vector<double> v(static_cast<size_t>(h) * w, nodes_[bias].val[0]);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double s = 0;
                for (int dy = 0; dy < 3; ++dy) {
                    const int yy = y + dy - 1;
                    if (yy < 0 || yy >= h) continue;
                    for (int dx = 0; dx < 3; ++dx) {
                        const int xx = x + dx - 1;
                        if (xx < 0 || xx >= w) continue;
                        const double* in = &nodes_[a].val[(yy * w + xx) * C];
                        const double* k = &nodes_[kernel].val[(dy * 3 + dx) * C];
                        for (int c = 0; c < C; ++c) s += k[c] * in[c];
                    }
                }
                v[y * w + x] += s;
            }
        auto out = push(h * w, 1, std::move(v));
        nodes_[out].backward = [this, a, kernel, bias, out, h, w, C] {
            const auto& g = nodes_[out].grad;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const double gv = g[y * w + x];
                    if (gv == 0.0) continue;
                    nodes_[bias].grad[0] += gv;
                    for (int dy = 0; dy < 3; ++dy) {
                        const int yy = y + dy - 1;
                        if (yy < 0 || yy >= h) continue;
                        for (int dx = 0; dx < 3; ++dx) {
                            const int xx = x + dx - 1;
                            if (xx < 0 || xx >= w) continue;
                            for (int c = 0; c < C; ++c) {
                                nodes_[a].grad[(yy * w + xx) * C + c] +=
                                    gv * nodes_[kernel].val[(dy * 3 + dx) * C + c];
                                nodes_[kernel].grad[(dy * 3 + dx) * C + c] +=
                                    gv * nodes_[a].val[(yy * w + xx) * C + c];
                            }
                        }
                    }
                }
        };
        return out;
    }

    /// Corner-aligned bilinear upsample of a 1 x (h*w) row to 1 x (H*W).
    Var upsample_bilinear(Var a, int h, int w, int H, int W) {
        if (nodes_[a].rows != 1 || nodes_[a].cols != h * w)
            throw ShapeError("upsample_bilinear: input is not 1 x h*w");
        struct Tapped {
            int i00, i01, i10, i11;
            double w00, w01, w10, w11;
        };
        std::vector<Tapped> taps(static_cast<size_t>(H) * W);
        const double sy = H > 1 ? static_cast<double>(h - 1) / (H - 1) : 0.0;
        const double sx = W > 1 ? static_cast<double>(w - 1) / (W - 1) : 0.0;
        std::vector<double> v(static_cast<size_t>(H) * W);
        for (int y = 0; y < H; ++y) {
            const double fy = H > 1 ? y * sy : (h - 1) * 0.5;
            const int y0 = std::min(static_cast<int>(fy), h - 1);
            const int y1 = std::min(y0 + 1, h - 1);
            const double wy = fy - y0;
            for (int x = 0; x < W; ++x) {
                const double fx = W > 1 ? x * sx : (w - 1) * 0.5;
                const int x0 = std::min(static_cast<int>(fx), w - 1);
                const int x1 = std::min(x0 + 1, w - 1);
                const double wx = fx - x0;
                Tapped t{y0 * w + x0, y0 * w + x1, y1 * w + x0, y1 * w + x1,
                         (1 - wy) * (1 - wx), (1 - wy) * wx, wy * (1 - wx), wy * wx};
                taps[y * W + x] = t;
                const auto& in = nodes_[a].val;
                v[y * W + x] = t.w00 * in[t.i00] + t.w01 * in[t.i01] + t.w10 * in[t.i10] +
                               t.w11 * in[t.i11];
            }
        }
        auto out = push(1, H * W, std::move(v));
        nodes_[out].backward = [this, a, out, taps = std::move(taps)] {
            const auto& g = nodes_[out].grad;
            auto& ga = nodes_[a].grad;
            for (size_t i = 0; i < taps.size(); ++i) {
                const auto& t = taps[i];
                ga[t.i00] += g[i] * t.w00;
                ga[t.i01] += g[i] * t.w01;
                ga[t.i10] += g[i] * t.w10;
                ga[t.i11] += g[i] * t.w11;
            }
        };
        return out;
    }

    // ---- losses ----

    /// Mean binary cross-entropy with soft targets; pred in (0,1).
    Var bce_loss(Var pred, const std::vector<double>& target) {
        const auto& p = nodes_[pred].val;
        if (p.size() != target.size()) throw ShapeError("bce_loss: size mismatch");
        constexpr double eps = 1e-12;
        double loss = 0;
        for (size_t i = 0; i < p.size(); ++i)
            loss -= target[i] * std::log(p[i] + eps) + (1 - target[i]) * std::log(1 - p[i] + eps);
        loss /= static_cast<double>(p.size());
        auto out = push(1, 1, {loss});
        nodes_[out].backward = [this, pred, out, target] {
            const double g = nodes_[out].grad[0] / static_cast<double>(target.size());
            const auto& p = nodes_[pred].val;
            for (size_t i = 0; i < p.size(); ++i)
                nodes_[pred].grad[i] +=
                    g * (-(target[i] / (p[i] + 1e-12)) + (1 - target[i]) / (1 - p[i] + 1e-12));
        };
        return out;
    }

    /// KL(G || P) after normalizing pred to sum 1; target must already
    /// be a distribution (nonnegative, sums to 1). pred must be > 0.
    Var kld_loss(Var pred, const std::vector<double>& target) {
        const auto& p = nodes_[pred].val;
        if (p.size() != target.size()) throw ShapeError("kld_loss: size mismatch");
        constexpr double eps = 1e-12;
        double sum = 0;
        for (double x : p) sum += x;
        double loss = 0;
        for (size_t i = 0; i < p.size(); ++i) {
            if (target[i] <= 0) continue;
            loss += target[i] * std::log(target[i] / (p[i] / sum + eps));
        }
        auto out = push(1, 1, {loss});
        nodes_[out].backward = [this, pred, out, target, sum] {
            const double g = nodes_[out].grad[0];
            const auto& p = nodes_[pred].val;
            double inner = 0;  // sum_i G_i * P_i / (P_i + eps)
            for (size_t i = 0; i < p.size(); ++i) {
                const double Pi = p[i] / sum;
                if (target[i] > 0) inner += target[i] * Pi / (Pi + 1e-12);
            }
            for (size_t j = 0; j < p.size(); ++j) {
                const double Pj = p[j] / sum;
                const double gj = target[j] > 0 ? target[j] / (Pj + 1e-12) : 0.0;
                nodes_[pred].grad[j] += g * (-(gj - inner) / sum);
            }
        };
        return out;
    }

    /// Negative log-likelihood of class y from a 1 x N probability row.
    Var nll_loss(Var probs, int y) {
        const double py = nodes_[probs].val[y];
        auto out = push(1, 1, {-std::log(py + 1e-12)});
        nodes_[out].backward = [this, probs, out, y, py] {
            nodes_[probs].grad[y] += nodes_[out].grad[0] * (-1.0 / (py + 1e-12));
        };
        return out;
    }

    void backward(Var loss) {
        for (auto& n : nodes_) std::fill(n.grad.begin(), n.grad.end(), 0.0);
        nodes_[loss].grad.assign(nodes_[loss].grad.size(), 0.0);
        nodes_[loss].grad[0] = 1.0;
        for (int i = loss; i >= 0; --i)
            if (nodes_[i].backward) nodes_[i].backward();
    }

    size_t size() const { return nodes_.size(); }

private:
    std::vector<Node> nodes_;

    Var push(int rows, int cols, std::vector<double> v) {
        Node n;
        n.rows = rows;
        n.cols = cols;
        n.grad.assign(v.size(), 0.0);
        n.val = std::move(v);
        nodes_.push_back(std::move(n));
        return static_cast<Var>(nodes_.size() - 1);
    }

    void same_shape(Var a, Var b, const char* op) const {
        if (nodes_[a].rows != nodes_[b].rows || nodes_[a].cols != nodes_[b].cols)
            throw ShapeError(std::string(op) + ": shape mismatch");
    }

    template <class F>
    Var map1(Var a, F f) {
        std::vector<double> v(nodes_[a].val);
        for (auto& x : v) x = f(x);
        return push(nodes_[a].rows, nodes_[a].cols, std::move(v));
    }

    template <class F>
    Var map2(Var a, Var b, F f) {
        std::vector<double> v(nodes_[a].val.size());
        for (size_t i = 0; i < v.size(); ++i) v[i] = f(nodes_[a].val[i], nodes_[b].val[i]);
        return push(nodes_[a].rows, nodes_[a].cols, std::move(v));
    }

    void axpy(const std::vector<double>& src, std::vector<double>& dst, double s) {
        for (size_t i = 0; i < src.size(); ++i) dst[i] += s * src[i];
    }
};

/// Named parameter tensor. Modules expose their trainables as a flat
/// list of these; the trainer owns the values and steps them.
struct Param {
    std::string name;
    int rows = 0, cols = 0;
    std::vector<double> values;
};

}  // namespace osagdo::ad

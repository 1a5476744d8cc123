#include "oracles/naive.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "core/errors.h"

namespace salseg::oracle {

AttentionResult naive_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                const std::vector<uint8_t>& visible, double scale) {
    const int m = q.dim(0), dk = q.dim(1);
    const int n = k.dim(0), dv = v.dim(1);
    if (k.dim(1) != dk || v.dim(0) != n) throw ShapeError("naive_attention shapes");
    if (visible.size() != static_cast<size_t>(n)) throw ShapeError("naive_attention mask size");
    int n_vis = 0;
    for (uint8_t b : visible) n_vis += b ? 1 : 0;
    if (n_vis == 0) throw ValidationError("naive_attention: no visible keys");

    AttentionResult r;
    r.output = Tensor({m, dv});
    r.probs = Tensor({m, n});
    for (int i = 0; i < m; ++i) {
        std::vector<double> scores(static_cast<size_t>(n), 0.0);
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) {
            if (!visible[static_cast<size_t>(j)]) continue;
            double s = 0.0;
            for (int d = 0; d < dk; ++d) s += q.at(i, d) * k.at(j, d);
            s *= scale;
            scores[static_cast<size_t>(j)] = s;
            mx = std::max(mx, s);
        }
        double z = 0.0;
        for (int j = 0; j < n; ++j) {
            if (!visible[static_cast<size_t>(j)]) continue;
            z += std::exp(scores[static_cast<size_t>(j)] - mx);
        }
        for (int j = 0; j < n; ++j) {
            if (!visible[static_cast<size_t>(j)]) continue;
            r.probs.at(i, j) = std::exp(scores[static_cast<size_t>(j)] - mx) / z;
        }
        for (int d = 0; d < dv; ++d) {
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += r.probs.at(i, j) * v.at(j, d);
            r.output.at(i, d) = acc;
        }
    }
    return r;
}

std::vector<double> finite_difference(const std::function<double(const std::vector<double>&)>& f,
                                      std::vector<double> point, double h) {
    if (h <= 0.0) throw ValidationError("finite_difference: h must be > 0");
    std::vector<double> grad(point.size(), 0.0);
    for (size_t i = 0; i < point.size(); ++i) {
        const double keep = point[i];
        point[i] = keep + h;
        const double fp = f(point);
        point[i] = keep - h;
        const double fm = f(point);
        point[i] = keep;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

std::vector<int> naive_topk(const std::vector<double>& values, int k) {
    const int n = static_cast<int>(values.size());
    k = std::min(k, n);
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (values[static_cast<size_t>(a)] != values[static_cast<size_t>(b)]) {
            return values[static_cast<size_t>(a)] > values[static_cast<size_t>(b)];
        }
        return a < b;  // ties toward the lowest index
    });
    order.resize(static_cast<size_t>(k));
    return order;
}

std::vector<double> naive_avg_pool(const Tensor& rows, const std::vector<int>& idx) {
    if (idx.empty()) throw ValidationError("naive_avg_pool: empty index set");
    const int d = rows.dim(1);
    std::vector<double> out(static_cast<size_t>(d), 0.0);
    for (int i : idx) {
        for (int j = 0; j < d; ++j) out[static_cast<size_t>(j)] += rows.at(i, j);
    }
    for (double& v : out) v /= static_cast<double>(idx.size());
    return out;
}

std::vector<double> naive_max_pool(const Tensor& rows, const std::vector<int>& idx) {
    if (idx.empty()) throw ValidationError("naive_max_pool: empty index set");
    const int d = rows.dim(1);
    std::vector<double> out(static_cast<size_t>(d), -std::numeric_limits<double>::infinity());
    for (int i : idx) {
        for (int j = 0; j < d; ++j) {
            out[static_cast<size_t>(j)] = std::max(out[static_cast<size_t>(j)], rows.at(i, j));
        }
    }
    return out;
}

Tensor naive_reassemble(const Tensor& fg, const Tensor& bg, const std::vector<double>& gate) {
    const int m = fg.dim(0), d = fg.dim(1);
    if (bg.dim(0) != m || bg.dim(1) != d) throw ShapeError("naive_reassemble shapes");
    if (gate.size() != static_cast<size_t>(d)) throw ShapeError("naive_reassemble gate length");
    Tensor out({m, d});
    for (int t = 0; t < m; ++t) {
        for (int j = 0; j < d; ++j) {
            const double g = gate[static_cast<size_t>(j)];
            out.at(t, j) = g * fg.at(t, j) + (1.0 - g) * bg.at(t, j);
        }
    }
    return out;
}

IouResult naive_iou(const std::vector<int32_t>& pred, const std::vector<int32_t>& gt,
                    int n_classes) {
    if (pred.size() != gt.size()) throw ShapeError("naive_iou size mismatch");
    std::vector<long long> tp(static_cast<size_t>(n_classes), 0);
    std::vector<long long> fp(static_cast<size_t>(n_classes), 0);
    std::vector<long long> fn(static_cast<size_t>(n_classes), 0);
    for (size_t i = 0; i < pred.size(); ++i) {
        const int p = pred[i], g = gt[i];
        if (p == g) {
            tp[static_cast<size_t>(p)]++;
        } else {
            fp[static_cast<size_t>(p)]++;
            fn[static_cast<size_t>(g)]++;
        }
    }
    IouResult r;
    r.per_class.assign(static_cast<size_t>(n_classes),
                       std::numeric_limits<double>::quiet_NaN());
    double acc = 0.0;
    int counted = 0;
    for (int c = 0; c < n_classes; ++c) {
        const long long denom = tp[static_cast<size_t>(c)] + fp[static_cast<size_t>(c)] +
                                fn[static_cast<size_t>(c)];
        if (denom == 0) continue;  // absent from both prediction and gt
        r.per_class[static_cast<size_t>(c)] =
            static_cast<double>(tp[static_cast<size_t>(c)]) / static_cast<double>(denom);
        acc += r.per_class[static_cast<size_t>(c)];
        ++counted;
    }
    r.mean = counted ? acc / counted : 0.0;
    return r;
}

double naive_ce(const Tensor& logits, const Tensor& onehot) {
    const int m = logits.dim(0), n = logits.dim(1);
    double loss = 0.0;
    for (int i = 0; i < m; ++i) {
        double mx = logits.at(i, 0);
        for (int j = 1; j < n; ++j) mx = std::max(mx, logits.at(i, j));
        double z = 0.0;
        for (int j = 0; j < n; ++j) z += std::exp(logits.at(i, j) - mx);
        for (int j = 0; j < n; ++j) {
            if (onehot.at(i, j) != 0.0) {
                loss -= onehot.at(i, j) * (logits.at(i, j) - mx - std::log(z));
            }
        }
    }
    return loss / m;
}

namespace {

std::vector<double> matvec_row(const Tensor& w, const Tensor& x, int row) {
    // x[row,:] * w, w is [d, d]
    const int d = w.dim(0);
    std::vector<double> out(static_cast<size_t>(d), 0.0);
    for (int j = 0; j < d; ++j) {
        double acc = 0.0;
        for (int c = 0; c < d; ++c) acc += x.at(row, c) * w.at(c, j);
        out[static_cast<size_t>(j)] = acc;
    }
    return out;
}

}  // namespace

Tensor naive_window_block(const Tensor& tokens, int h, int w,
                          const std::vector<uint8_t>& visible, int window, int offset,
                          const Tensor& wq, const Tensor& wk, const Tensor& wv, const Tensor& wo) {
    const int d = tokens.dim(1);
    if (tokens.dim(0) != h * w) throw ShapeError("naive_window_block token count");
    Tensor out = tokens;  // invisible tokens pass through
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (int r0 = -offset; r0 < h; r0 += window) {
        for (int c0 = -offset; c0 < w; c0 += window) {
            std::vector<int> idx;
            for (int r = std::max(r0, 0); r < std::min(r0 + window, h); ++r) {
                for (int c = std::max(c0, 0); c < std::min(c0 + window, w); ++c) {
                    const int t = r * w + c;
                    if (visible[static_cast<size_t>(t)]) idx.push_back(t);
                }
            }
            if (idx.empty()) continue;
            const int m = static_cast<int>(idx.size());
            // project q/k/v per token, then full softmax attention
            Tensor q({m, d}), k({m, d}), v({m, d});
            for (int i = 0; i < m; ++i) {
                auto qi = matvec_row(wq, tokens, idx[static_cast<size_t>(i)]);
                auto ki = matvec_row(wk, tokens, idx[static_cast<size_t>(i)]);
                auto vi = matvec_row(wv, tokens, idx[static_cast<size_t>(i)]);
                for (int j = 0; j < d; ++j) {
                    q.at(i, j) = qi[static_cast<size_t>(j)];
                    k.at(i, j) = ki[static_cast<size_t>(j)];
                    v.at(i, j) = vi[static_cast<size_t>(j)];
                }
            }
            std::vector<uint8_t> all(static_cast<size_t>(m), 1);
            AttentionResult att = naive_attention(q, k, v, all, scale);
            for (int i = 0; i < m; ++i) {
                auto oi = matvec_row(wo, att.output, i);
                for (int j = 0; j < d; ++j) out.at(idx[static_cast<size_t>(i)], j) = oi[static_cast<size_t>(j)];
            }
        }
    }
    return out;
}

Tensor naive_window_refine(const Tensor& tokens, int h, int w,
                           const std::vector<uint8_t>& visible, int window,
                           const Tensor& wq0, const Tensor& wk0, const Tensor& wv0, const Tensor& wo0,
                           const Tensor& wq1, const Tensor& wk1, const Tensor& wv1, const Tensor& wo1) {
    Tensor mid = naive_window_block(tokens, h, w, visible, window, 0, wq0, wk0, wv0, wo0);
    return naive_window_block(mid, h, w, visible, window, window / 2, wq1, wk1, wv1, wo1);
}

}  // namespace salseg::oracle

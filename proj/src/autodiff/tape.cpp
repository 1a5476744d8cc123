#include "autodiff/tape.h"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "core/errors.h"

namespace salseg {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const MatRM>;
using MMap = Eigen::Map<MatRM>;

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": " + a.shape_str() + " vs " + b.shape_str());
    }
}

void check_2d(const Tensor& a, const char* op) {
    if (a.ndim() != 2) throw ShapeError(std::string(op) + ": expected 2-D, got " + a.shape_str());
}

void axpy(Tensor& dst, const Tensor& src, double s) {
    for (int i = 0; i < dst.numel(); ++i) dst[i] += s * src[i];
}

}  // namespace

Tape::Var Tape::push(Tensor value, bool requires_grad, std::vector<Var> parents,
                     std::function<void(Tape&)> back) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.back = requires_grad ? std::move(back) : std::function<void(Tape&)>();
    nodes_.push_back(std::move(n));
    parents_.push_back(std::move(parents));
    return static_cast<Var>(nodes_.size() - 1);
}

Tape::Var Tape::leaf(const Tensor& value) { return push(value, true, {}, {}); }
Tape::Var Tape::constant(const Tensor& value) { return push(value, false, {}, {}); }

Tensor& Tape::grad_buf(Var v) {
    Node& n = nodes_[static_cast<size_t>(v)];
    if (!n.grad_alloc) {
        n.grad = Tensor(n.value.shape());
        n.grad_alloc = true;
    }
    return n.grad;
}

const Tensor& Tape::grad(Var v) {
    return grad_buf(v);  // zeros when nothing flowed into it
}

bool Tape::any_grad(std::initializer_list<Var> vars) const {
    for (Var v : vars) {
        if (nodes_[static_cast<size_t>(v)].requires_grad) return true;
    }
    return false;
}

void Tape::backward(Var root) {
    if (val(root).numel() != 1) {
        throw GradientError("backward root must be scalar, got " + val(root).shape_str());
    }
    std::vector<char> reachable(nodes_.size(), 0);
    std::vector<Var> stack = {root};
    reachable[static_cast<size_t>(root)] = 1;
    while (!stack.empty()) {
        Var v = stack.back();
        stack.pop_back();
        for (Var p : parents_[static_cast<size_t>(v)]) {
            if (!reachable[static_cast<size_t>(p)]) {
                reachable[static_cast<size_t>(p)] = 1;
                stack.push_back(p);
            }
        }
    }
    grad_buf(root)[0] = 1.0;
    for (Var v = root; v >= 0; --v) {
        Node& n = nodes_[static_cast<size_t>(v)];
        if (!reachable[static_cast<size_t>(v)] || !n.requires_grad || !n.grad_alloc) continue;
        if (n.back) n.back(*this);
    }
}

bool Tape::reaches(Var node, Var ancestor) const {
    if (node == ancestor) return true;
    std::vector<char> seen(nodes_.size(), 0);
    std::vector<Var> stack = {node};
    seen[static_cast<size_t>(node)] = 1;
    while (!stack.empty()) {
        Var v = stack.back();
        stack.pop_back();
        for (Var p : parents_[static_cast<size_t>(v)]) {
            if (p == ancestor) return true;
            if (!seen[static_cast<size_t>(p)]) {
                seen[static_cast<size_t>(p)] = 1;
                stack.push_back(p);
            }
        }
    }
    return false;
}

Tape::Var Tape::add(Var a, Var b) {
    check_same_shape(val(a), val(b), "add");
    Tensor out = val(a);
    axpy(out, val(b), 1.0);
    Var self = size();
    return push(std::move(out), any_grad({a, b}), {a, b}, [a, b, self](Tape& t) {
        const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
        if (t.requires_grad(a)) axpy(t.grad_buf(a), g, 1.0);
        if (t.requires_grad(b)) axpy(t.grad_buf(b), g, 1.0);
    });
}

Tape::Var Tape::sub(Var a, Var b) {
    check_same_shape(val(a), val(b), "sub");
    Tensor out = val(a);
    axpy(out, val(b), -1.0);
    Var self = size();
    return push(std::move(out), any_grad({a, b}), {a, b}, [a, b, self](Tape& t) {
        const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
        if (t.requires_grad(a)) axpy(t.grad_buf(a), g, 1.0);
        if (t.requires_grad(b)) axpy(t.grad_buf(b), g, -1.0);
    });
}

Tape::Var Tape::mul(Var a, Var b) {
    check_same_shape(val(a), val(b), "mul");
    Tensor out = val(a);
    for (int i = 0; i < out.numel(); ++i) out[i] *= val(b)[i];
    Var self = size();
    return push(std::move(out), any_grad({a, b}), {a, b}, [a, b, self](Tape& t) {
        const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
        if (t.requires_grad(a)) {
            Tensor& ga = t.grad_buf(a);
            for (int i = 0; i < ga.numel(); ++i) ga[i] += g[i] * t.val(b)[i];
        }
        if (t.requires_grad(b)) {
            Tensor& gb = t.grad_buf(b);
            for (int i = 0; i < gb.numel(); ++i) gb[i] += g[i] * t.val(a)[i];
        }
    });
}

Tape::Var Tape::scale(Var a, double s) {
    Tensor out = val(a);
    for (int i = 0; i < out.numel(); ++i) out[i] *= s;
    Var self = size();
    return push(std::move(out), any_grad({a}), {a}, [a, s, self](Tape& t) {
        axpy(t.grad_buf(a), t.nodes_[static_cast<size_t>(self)].grad, s);
    });
}

Tape::Var Tape::add_const(Var a, const Tensor& c) {
    check_same_shape(val(a), c, "add_const");
    Tensor out = val(a);
    axpy(out, c, 1.0);
    Var self = size();
    return push(std::move(out), any_grad({a}), {a}, [a, self](Tape& t) {
        axpy(t.grad_buf(a), t.nodes_[static_cast<size_t>(self)].grad, 1.0);
    });
}

Tape::Var Tape::mul_const(Var a, const Tensor& c) {
    check_same_shape(val(a), c, "mul_const");
    Tensor out = val(a);
    for (int i = 0; i < out.numel(); ++i) out[i] *= c[i];
    Var self = size();
    Tensor cc = c;
    return push(std::move(out), any_grad({a}), {a}, [a, self, cc = std::move(cc)](Tape& t) {
        const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
        Tensor& ga = t.grad_buf(a);
        for (int i = 0; i < ga.numel(); ++i) ga[i] += g[i] * cc[i];
    });
}

Tape::Var Tape::relu(Var a) {
    Tensor out = val(a);
    for (int i = 0; i < out.numel(); ++i) out[i] = std::max(0.0, out[i]);
    Var self = size();
    return push(std::move(out), any_grad({a}), {a}, [a, self](Tape& t) {
        const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
        Tensor& ga = t.grad_buf(a);
        for (int i = 0; i < ga.numel(); ++i) {
            if (t.val(a)[i] > 0.0) ga[i] += g[i];
        }
    });
}

Tape::Var Tape::sigmoid(Var a) {
    Tensor out = val(a);
    for (int i = 0; i < out.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
    Var self = size();
    return push(std::move(out), any_grad({a}), {a}, [a, self](Tape& t) {
        const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
        const Tensor& y = t.val(self);
        Tensor& ga = t.grad_buf(a);
        for (int i = 0; i < ga.numel(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
    });
}

Tape::Var Tape::matmul(Var a, Var b) {
    check_2d(val(a), "matmul");
    check_2d(val(b), "matmul");
    const int m = val(a).dim(0), k = val(a).dim(1), n = val(b).dim(1);
    if (val(b).dim(0) != k) {
        throw ShapeError("matmul: " + val(a).shape_str() + " x " + val(b).shape_str());
    }
    Tensor out({m, n});
    MMap(out.data(), m, n) = CMap(val(a).data(), m, k) * CMap(val(b).data(), k, n);
    Var self = size();
    return push(std::move(out), any_grad({a, b}), {a, b}, [a, b, self, m, k, n](Tape& t) {
        CMap g(t.nodes_[static_cast<size_t>(self)].grad.data(), m, n);
        if (t.requires_grad(a)) {
            MMap(t.grad_buf(a).data(), m, k).noalias() += g * CMap(t.val(b).data(), k, n).transpose();
        }
        if (t.requires_grad(b)) {
            MMap(t.grad_buf(b).data(), k, n).noalias() += CMap(t.val(a).data(), m, k).transpose() * g;
        }
    });
}

Tape::Var Tape::linear_nobias(Var x, Var w) { return matmul(x, w); }

Tape::Var Tape::linear(Var x, Var w, Var b) {
    check_2d(val(x), "linear");
    check_2d(val(w), "linear");
    const int m = val(x).dim(0), in = val(x).dim(1), out_d = val(w).dim(1);
    if (val(w).dim(0) != in || val(b).numel() != out_d) {
        throw ShapeError("linear: x " + val(x).shape_str() + ", w " + val(w).shape_str() + ", b " +
                         val(b).shape_str());
    }
    Tensor out({m, out_d});
    MMap o(out.data(), m, out_d);
    o = CMap(val(x).data(), m, in) * CMap(val(w).data(), in, out_d);
    o.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(val(b).data(), out_d);
    Var self = size();
    return push(std::move(out), any_grad({x, w, b}), {x, w, b},
                [x, w, b, self, m, in, out_d](Tape& t) {
                    CMap g(t.nodes_[static_cast<size_t>(self)].grad.data(), m, out_d);
                    if (t.requires_grad(x)) {
                        MMap(t.grad_buf(x).data(), m, in).noalias() +=
                            g * CMap(t.val(w).data(), in, out_d).transpose();
                    }
                    if (t.requires_grad(w)) {
                        MMap(t.grad_buf(w).data(), in, out_d).noalias() +=
                            CMap(t.val(x).data(), m, in).transpose() * g;
                    }
                    if (t.requires_grad(b)) {
                        Eigen::Map<Eigen::RowVectorXd>(t.grad_buf(b).data(), out_d) +=
                            g.colwise().sum();
                    }
                });
}

Tape::Var Tape::transpose(Var a) {
    check_2d(val(a), "transpose");
    const int m = val(a).dim(0), n = val(a).dim(1);
    Tensor out({n, m});
    MMap(out.data(), n, m) = CMap(val(a).data(), m, n).transpose();
    Var self = size();
    return push(std::move(out), any_grad({a}), {a}, [a, self, m, n](Tape& t) {
        CMap g(t.nodes_[static_cast<size_t>(self)].grad.data(), n, m);
        MMap(t.grad_buf(a).data(), m, n) += g.transpose();
    });
}

Tape::Var Tape::reshape(Var a, std::vector<int> shape) {
    Tensor out = val(a).reshaped(shape);
    Var self = size();
    return push(std::move(out), any_grad({a}), {a}, [a, self](Tape& t) {
        const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
        Tensor& ga = t.grad_buf(a);
        for (int i = 0; i < ga.numel(); ++i) ga[i] += g[i];
    });
}

Tape::Var Tape::slice_cols(Var a, int c0, int c1) {
    check_2d(val(a), "slice_cols");
    const int m = val(a).dim(0), n = val(a).dim(1);
    if (c0 < 0 || c1 > n || c0 >= c1) throw ShapeError("slice_cols bounds");
    const int w = c1 - c0;
    Tensor out({m, w});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < w; ++j) out.at(i, j) = val(a).at(i, c0 + j);
    }
    Var self = size();
    return push(std::move(out), any_grad({a}), {a}, [a, self, m, w, c0](Tape& t) {
        const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
        Tensor& ga = t.grad_buf(a);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < w; ++j) ga.at(i, c0 + j) += g.at(i, j);
        }
    });
}

Tape::Var Tape::concat_cols(Var a, Var b) {
    check_2d(val(a), "concat_cols");
    check_2d(val(b), "concat_cols");
    const int m = val(a).dim(0), p = val(a).dim(1), q = val(b).dim(1);
    if (val(b).dim(0) != m) throw ShapeError("concat_cols row mismatch");
    Tensor out({m, p + q});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < p; ++j) out.at(i, j) = val(a).at(i, j);
        for (int j = 0; j < q; ++j) out.at(i, p + j) = val(b).at(i, j);
    }
    Var self = size();
    return push(std::move(out), any_grad({a, b}), {a, b}, [a, b, self, m, p, q](Tape& t) {
        const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
        if (t.requires_grad(a)) {
            Tensor& ga = t.grad_buf(a);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < p; ++j) ga.at(i, j) += g.at(i, j);
        }
        if (t.requires_grad(b)) {
            Tensor& gb = t.grad_buf(b);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < q; ++j) gb.at(i, j) += g.at(i, p + j);
        }
    });
}

Tape::Var Tape::gather_rows(Var a, std::vector<int> idx) {
    check_2d(val(a), "gather_rows");
    const int m = val(a).dim(0), d = val(a).dim(1);
    Tensor out({static_cast<int>(idx.size()), d});
    for (size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= m) throw IndexError("gather_rows index out of range");
        for (int j = 0; j < d; ++j) out.at(static_cast<int>(i), j) = val(a).at(idx[i], j);
    }
    Var self = size();
    return push(std::move(out), any_grad({a}), {a}, [a, self, d, idx = std::move(idx)](Tape& t) {
        const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
        Tensor& ga = t.grad_buf(a);
        for (size_t i = 0; i < idx.size(); ++i) {
            for (int j = 0; j < d; ++j) ga.at(idx[i], j) += g.at(static_cast<int>(i), j);
        }
    });
}

Tape::Var Tape::row_update(Var base, Var rows, std::vector<int> idx) {
    check_2d(val(base), "row_update");
    check_2d(val(rows), "row_update");
    const int m = val(base).dim(0), d = val(base).dim(1);
    if (val(rows).dim(1) != d || val(rows).dim(0) != static_cast<int>(idx.size())) {
        throw ShapeError("row_update rows shape mismatch");
    }
    Tensor out = val(base);
    std::vector<char> overwritten(static_cast<size_t>(m), 0);
    for (size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= m) throw IndexError("row_update index out of range");
        for (int j = 0; j < d; ++j) out.at(idx[i], j) = val(rows).at(static_cast<int>(i), j);
        overwritten[static_cast<size_t>(idx[i])] = 1;
    }
    // Gradient routes to the last writer of each row; overwritten base rows
    // receive none.
    std::vector<char> is_last(idx.size(), 0);
    {
        std::vector<char> seen(static_cast<size_t>(m), 0);
        for (size_t i = idx.size(); i-- > 0;) {
            if (!seen[static_cast<size_t>(idx[i])]) {
                seen[static_cast<size_t>(idx[i])] = 1;
                is_last[i] = 1;
            }
        }
    }
    Var self = size();
    return push(std::move(out), any_grad({base, rows}), {base, rows},
                [base, rows, self, m, d, idx = std::move(idx), is_last = std::move(is_last),
                 overwritten = std::move(overwritten)](Tape& t) {
                    const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
                    if (t.requires_grad(rows)) {
                        Tensor& gr = t.grad_buf(rows);
                        for (size_t i = 0; i < idx.size(); ++i) {
                            if (!is_last[i]) continue;
                            for (int j = 0; j < d; ++j) gr.at(static_cast<int>(i), j) += g.at(idx[i], j);
                        }
                    }
                    if (t.requires_grad(base)) {
                        Tensor& gb = t.grad_buf(base);
                        for (int i = 0; i < m; ++i) {
                            if (overwritten[static_cast<size_t>(i)]) continue;
                            for (int j = 0; j < d; ++j) gb.at(i, j) += g.at(i, j);
                        }
                    }
                });
}

Tape::Var Tape::mul_rowvec(Var x, Var g) {
    check_2d(val(x), "mul_rowvec");
    const int m = val(x).dim(0), d = val(x).dim(1);
    if (val(g).numel() != d) throw ShapeError("mul_rowvec vector length mismatch");
    Tensor out({m, d});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < d; ++j) out.at(i, j) = val(x).at(i, j) * val(g)[j];
    }
    Var self = size();
    return push(std::move(out), any_grad({x, g}), {x, g}, [x, g, self, m, d](Tape& t) {
        const Tensor& go = t.nodes_[static_cast<size_t>(self)].grad;
        if (t.requires_grad(x)) {
            Tensor& gx = t.grad_buf(x);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < d; ++j) gx.at(i, j) += go.at(i, j) * t.val(g)[j];
        }
        if (t.requires_grad(g)) {
            Tensor& gg = t.grad_buf(g);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < d; ++j) gg[j] += go.at(i, j) * t.val(x).at(i, j);
        }
    });
}

Tape::Var Tape::mul_colvec(Var x, Var c) {
    check_2d(val(x), "mul_colvec");
    const int m = val(x).dim(0), d = val(x).dim(1);
    if (val(c).numel() != m) throw ShapeError("mul_colvec vector length mismatch");
    Tensor out({m, d});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < d; ++j) out.at(i, j) = val(x).at(i, j) * val(c)[i];
    }
    Var self = size();
    return push(std::move(out), any_grad({x, c}), {x, c}, [x, c, self, m, d](Tape& t) {
        const Tensor& go = t.nodes_[static_cast<size_t>(self)].grad;
        if (t.requires_grad(x)) {
            Tensor& gx = t.grad_buf(x);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < d; ++j) gx.at(i, j) += go.at(i, j) * t.val(c)[i];
        }
        if (t.requires_grad(c)) {
            Tensor& gc = t.grad_buf(c);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < d; ++j) gc[i] += go.at(i, j) * t.val(x).at(i, j);
        }
    });
}

Tape::Var Tape::mul_scalar_var(Var x, Var s) {
    if (val(s).numel() != 1) throw ShapeError("mul_scalar_var: scalar expected");
    Tensor out = val(x);
    const double sv = val(s)[0];
    for (int i = 0; i < out.numel(); ++i) out[i] *= sv;
    Var self = size();
    return push(std::move(out), any_grad({x, s}), {x, s}, [x, s, self](Tape& t) {
        const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
        if (t.requires_grad(x)) axpy(t.grad_buf(x), g, t.val(s)[0]);
        if (t.requires_grad(s)) {
            double acc = 0.0;
            for (int i = 0; i < g.numel(); ++i) acc += g[i] * t.val(x)[i];
            t.grad_buf(s)[0] += acc;
        }
    });
}

Tape::Var Tape::sum(Var a) {
    double acc = 0.0;
    for (int i = 0; i < val(a).numel(); ++i) acc += val(a)[i];
    Var self = size();
    return push(Tensor::scalar(acc), any_grad({a}), {a}, [a, self](Tape& t) {
        const double g = t.nodes_[static_cast<size_t>(self)].grad[0];
        Tensor& ga = t.grad_buf(a);
        for (int i = 0; i < ga.numel(); ++i) ga[i] += g;
    });
}

Tape::Var Tape::mean(Var a) {
    const int n = val(a).numel();
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += val(a)[i];
    Var self = size();
    return push(Tensor::scalar(acc / n), any_grad({a}), {a}, [a, self, n](Tape& t) {
        const double g = t.nodes_[static_cast<size_t>(self)].grad[0] / n;
        Tensor& ga = t.grad_buf(a);
        for (int i = 0; i < ga.numel(); ++i) ga[i] += g;
    });
}

Tape::Var Tape::col_mean(Var a) {
    check_2d(val(a), "col_mean");
    const int m = val(a).dim(0), d = val(a).dim(1);
    Tensor out({1, d});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < d; ++j) out.at(0, j) += val(a).at(i, j) / m;
    }
    Var self = size();
    return push(std::move(out), any_grad({a}), {a}, [a, self, m, d](Tape& t) {
        const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
        Tensor& ga = t.grad_buf(a);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < d; ++j) ga.at(i, j) += g.at(0, j) / m;
        }
    });
}

Tape::Var Tape::col_max(Var a) {
    check_2d(val(a), "col_max");
    const int m = val(a).dim(0), d = val(a).dim(1);
    Tensor out({1, d});
    std::vector<int> arg(static_cast<size_t>(d), 0);
    for (int j = 0; j < d; ++j) {
        double best = val(a).at(0, j);
        for (int i = 1; i < m; ++i) {
            if (val(a).at(i, j) > best) {
                best = val(a).at(i, j);
                arg[static_cast<size_t>(j)] = i;
            }
        }
        out.at(0, j) = best;
    }
    Var self = size();
    return push(std::move(out), any_grad({a}), {a}, [a, self, d, arg = std::move(arg)](Tape& t) {
        const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
        Tensor& ga = t.grad_buf(a);
        for (int j = 0; j < d; ++j) ga.at(arg[static_cast<size_t>(j)], j) += g.at(0, j);
    });
}

Tape::Var Tape::softmax_rows(Var a) {
    check_2d(val(a), "softmax_rows");
    const int m = val(a).dim(0), n = val(a).dim(1);
    Tensor out({m, n});
    for (int i = 0; i < m; ++i) {
        double mx = val(a).at(i, 0);
        for (int j = 1; j < n; ++j) mx = std::max(mx, val(a).at(i, j));
        double z = 0.0;
        for (int j = 0; j < n; ++j) {
            out.at(i, j) = std::exp(val(a).at(i, j) - mx);
            z += out.at(i, j);
        }
        for (int j = 0; j < n; ++j) out.at(i, j) /= z;
    }
    Var self = size();
    return push(std::move(out), any_grad({a}), {a}, [a, self, m, n](Tape& t) {
        const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
        const Tensor& y = t.val(self);
        Tensor& ga = t.grad_buf(a);
        for (int i = 0; i < m; ++i) {
            double dot = 0.0;
            for (int j = 0; j < n; ++j) dot += g.at(i, j) * y.at(i, j);
            for (int j = 0; j < n; ++j) ga.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
        }
    });
}

Tape::Var Tape::ce_mean_rows(Var logits, const Tensor& onehot) {
    check_2d(val(logits), "ce_mean_rows");
    check_same_shape(val(logits), onehot, "ce_mean_rows");
    const int m = val(logits).dim(0), n = val(logits).dim(1);
    Tensor probs({m, n});
    double loss = 0.0;
    for (int i = 0; i < m; ++i) {
        double mx = val(logits).at(i, 0);
        for (int j = 1; j < n; ++j) mx = std::max(mx, val(logits).at(i, j));
        double z = 0.0;
        for (int j = 0; j < n; ++j) z += std::exp(val(logits).at(i, j) - mx);
        const double logz = std::log(z) + mx;
        for (int j = 0; j < n; ++j) {
            probs.at(i, j) = std::exp(val(logits).at(i, j) - logz);
            loss -= onehot.at(i, j) * (val(logits).at(i, j) - logz);
        }
    }
    loss /= m;
    Var self = size();
    return push(Tensor::scalar(loss), any_grad({logits}), {logits},
                [logits, self, m, n, probs = std::move(probs), onehot](Tape& t) {
                    const double g = t.nodes_[static_cast<size_t>(self)].grad[0] / m;
                    Tensor& gl = t.grad_buf(logits);
                    for (int i = 0; i < m; ++i) {
                        for (int j = 0; j < n; ++j) {
                            gl.at(i, j) += g * (probs.at(i, j) - onehot.at(i, j));
                        }
                    }
                });
}

Tape::Var Tape::bce_logits_mean(Var scores, const Tensor& targets) {
    if (val(scores).numel() != targets.numel()) throw ShapeError("bce size mismatch");
    const int m = val(scores).numel();
    double loss = 0.0;
    auto softplus = [](double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); };
    for (int i = 0; i < m; ++i) {
        const double s = val(scores)[i], tgt = targets[i];
        loss += tgt * softplus(-s) + (1.0 - tgt) * softplus(s);
    }
    loss /= m;
    Var self = size();
    Tensor tc = targets;
    return push(Tensor::scalar(loss), any_grad({scores}), {scores},
                [scores, self, m, tc = std::move(tc)](Tape& t) {
                    const double g = t.nodes_[static_cast<size_t>(self)].grad[0] / m;
                    Tensor& gs = t.grad_buf(scores);
                    for (int i = 0; i < m; ++i) {
                        const double sig = 1.0 / (1.0 + std::exp(-t.val(scores)[i]));
                        gs[i] += g * (sig - tc[i]);
                    }
                });
}

Tape::Var Tape::tconv2x2(Var x, Var w, Var b) {
    const Tensor& xv = val(x);
    const Tensor& wv = val(w);
    if (xv.ndim() != 3) throw ShapeError("tconv2x2 input must be [H,W,C]");
    if (wv.ndim() != 4 || wv.dim(0) != 2 || wv.dim(1) != 2) {
        throw ShapeError("tconv2x2 weight must be [2,2,Cin,Cout]");
    }
    const int h = xv.dim(0), wdt = xv.dim(1), ci = xv.dim(2), co = wv.dim(3);
    if (wv.dim(2) != ci || val(b).numel() != co) throw ShapeError("tconv2x2 channel mismatch");
    Tensor out({2 * h, 2 * wdt, co});
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < wdt; ++j) {
            for (int a = 0; a < 2; ++a) {
                for (int bb = 0; bb < 2; ++bb) {
                    for (int o = 0; o < co; ++o) {
                        double acc = val(b)[o];
                        for (int c = 0; c < ci; ++c) acc += xv.at(i, j, c) * wv.at(a, bb, c, o);
                        out.at(2 * i + a, 2 * j + bb, o) = acc;
                    }
                }
            }
        }
    }
    Var self = size();
    return push(std::move(out), any_grad({x, w, b}), {x, w, b},
                [x, w, b, self, h, wdt, ci, co](Tape& t) {
                    const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
                    const Tensor& xv = t.val(x);
                    const Tensor& wv = t.val(w);
                    const bool gx = t.requires_grad(x), gw = t.requires_grad(w), gb = t.requires_grad(b);
                    Tensor* dx = gx ? &t.grad_buf(x) : nullptr;
                    Tensor* dw = gw ? &t.grad_buf(w) : nullptr;
                    Tensor* db = gb ? &t.grad_buf(b) : nullptr;
                    for (int i = 0; i < h; ++i) {
                        for (int j = 0; j < wdt; ++j) {
                            for (int a = 0; a < 2; ++a) {
                                for (int bb = 0; bb < 2; ++bb) {
                                    for (int o = 0; o < co; ++o) {
                                        const double go = g.at(2 * i + a, 2 * j + bb, o);
                                        if (go == 0.0) continue;
                                        if (db) (*db)[o] += go;
                                        for (int c = 0; c < ci; ++c) {
                                            if (dx) dx->at(i, j, c) += go * wv.at(a, bb, c, o);
                                            if (dw) dw->at(a, bb, c, o) += go * xv.at(i, j, c);
                                        }
                                    }
                                }
                            }
                        }
                    }
                });
}

Tape::Var Tape::upsample2(Var x) {
    const Tensor& xv = val(x);
    if (xv.ndim() != 3) throw ShapeError("upsample2 input must be [H,W,C]");
    const int h = xv.dim(0), w = xv.dim(1), c = xv.dim(2);
    Tensor out({2 * h, 2 * w, c});
    for (int i = 0; i < 2 * h; ++i) {
        for (int j = 0; j < 2 * w; ++j) {
            for (int k = 0; k < c; ++k) out.at(i, j, k) = xv.at(i / 2, j / 2, k);
        }
    }
    Var self = size();
    return push(std::move(out), any_grad({x}), {x}, [x, self, h, w, c](Tape& t) {
        const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
        Tensor& gx = t.grad_buf(x);
        for (int i = 0; i < 2 * h; ++i) {
            for (int j = 0; j < 2 * w; ++j) {
                for (int k = 0; k < c; ++k) gx.at(i / 2, j / 2, k) += g.at(i, j, k);
            }
        }
    });
}

}  // namespace salseg

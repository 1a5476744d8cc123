#pragma once

#include <functional>
#include <vector>

#include "core/tensor.h"

namespace salseg {

// Reverse-mode tape over Tensor values. Nodes are created in topological
// order (parents always precede children), so backward() is a single reverse
// sweep over the nodes reachable from the root. Single-threaded by design.
class Tape {
public:
    using Var = int;

    Var leaf(const Tensor& value);      // participates in gradients
    Var constant(const Tensor& value);  // gradient never flows into it

    const Tensor& val(Var v) const { return nodes_[static_cast<size_t>(v)].value; }
    const Tensor& grad(Var v);  // zeros when nothing flowed into it
    bool requires_grad(Var v) const { return nodes_[static_cast<size_t>(v)].requires_grad; }
    int size() const { return static_cast<int>(nodes_.size()); }

    // Seeds d(root)/d(root) = 1 and accumulates gradients into every
    // reachable grad-requiring node. root must be a scalar.
    void backward(Var root);

    // Structural dependency: true when `ancestor` is reachable from `node`
    // through parent edges. Used to detect objectives that ignore an input.
    bool reaches(Var node, Var ancestor) const;

    // ---- elementwise / algebra ----
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double s);
    Var add_const(Var a, const Tensor& c);
    Var mul_const(Var a, const Tensor& c);
    Var relu(Var a);
    Var sigmoid(Var a);

    // ---- linear algebra ----
    Var matmul(Var a, Var b);             // [m,k] x [k,n]
    Var linear(Var x, Var w, Var b);      // x [m,in], w [in,out], b [out]
    Var linear_nobias(Var x, Var w);
    Var transpose(Var a);                 // 2-D

    // ---- shape / indexing ----
    Var reshape(Var a, std::vector<int> shape);
    Var slice_cols(Var a, int c0, int c1);                   // [m,n] -> [m,c1-c0)
    Var concat_cols(Var a, Var b);                           // [m,p]+[m,q] -> [m,p+q]
    Var gather_rows(Var a, std::vector<int> idx);            // [m,d] -> [|idx|,d]
    Var row_update(Var base, Var rows, std::vector<int> idx);// overwrite rows of base

    // ---- broadcasting ----
    Var mul_rowvec(Var x, Var g);   // x [m,d] * g [1,d], broadcast over rows
    Var mul_colvec(Var x, Var c);   // x [m,d] * c [m,1], broadcast over cols
    Var mul_scalar_var(Var x, Var s);  // x * scalar var

    // ---- reductions ----
    Var sum(Var a);                  // -> [1]
    Var mean(Var a);                 // -> [1]
    Var col_mean(Var a);             // [m,d] -> [1,d]
    Var col_max(Var a);              // [m,d] -> [1,d], ties take the first row
    Var softmax_rows(Var a);         // [m,n], rows sum to 1
    Var ce_mean_rows(Var logits, const Tensor& onehot);      // scalar
    Var bce_logits_mean(Var scores, const Tensor& targets);  // scalar

    // ---- spatial (tensors shaped [H,W,C]) ----
    Var tconv2x2(Var x, Var w, Var b);  // w [2,2,Cin,Cout] -> [2H,2W,Cout]
    Var upsample2(Var x);               // nearest -> [2H,2W,C]

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        bool grad_alloc = false;
        std::function<void(Tape&)> back;  // empty for leaves/constants
    };

    Var push(Tensor value, bool requires_grad, std::vector<Var> parents,
             std::function<void(Tape&)> back);
    Tensor& grad_buf(Var v);
    bool any_grad(std::initializer_list<Var> vars) const;

    std::vector<Node> nodes_;
    std::vector<std::vector<Var>> parents_;
};

}  // namespace salseg

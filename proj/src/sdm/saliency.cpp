#include "sdm/saliency.h"

#include <algorithm>

#include "core/errors.h"

namespace salseg {

Tensor saliency_gradient(const AttentionMap& attn, const SaliencyObjective& objective) {
    Tape tape;
    Tape::Var leaf = tape.leaf(attn.values);
    Tape::Var obj = objective(tape, leaf);
    if (tape.val(obj).numel() != 1) {
        throw GradientError("saliency objective must be scalar");
    }
    if (!tape.reaches(obj, leaf)) {
        throw GradientError("saliency objective does not depend on the attention map");
    }
    tape.backward(obj);
    return tape.grad(leaf);
}

namespace {

SaliencyStack assemble(const AttentionMap& attn, int grid_h, int grid_w, const Tensor& grad) {
    const int hw = attn.tokens(), nc = attn.n_classes();
    if (grid_h * grid_w != hw) throw ShapeError("saliency grid does not match token count");
    Tensor maps({grid_h, grid_w, nc});
    for (int t = 0; t < hw; ++t) {
        for (int n = 0; n < nc; ++n) {
            maps[t * nc + n] = std::max(0.0, grad.at(t, n)) * attn.values.at(t, n);
        }
    }
    return SaliencyStack::make(std::move(maps), attn);
}

}  // namespace

SaliencyStack compute_saliency(const AttentionMap& attn, int grid_h, int grid_w,
                               const SaliencyObjective& objective) {
    return assemble(attn, grid_h, grid_w, saliency_gradient(attn, objective));
}

SaliencyStack compute_saliency_per_class(
    const AttentionMap& attn, int grid_h, int grid_w,
    const std::function<SaliencyObjective(int cls)>& objective_for_class) {
    const int hw = attn.tokens(), nc = attn.n_classes();
    Tensor grad({hw, nc});
    for (int n = 0; n < nc; ++n) {
        Tensor g = saliency_gradient(attn, objective_for_class(n));
        for (int t = 0; t < hw; ++t) grad.at(t, n) = g.at(t, n);
    }
    return assemble(attn, grid_h, grid_w, grad);
}

}  // namespace salseg

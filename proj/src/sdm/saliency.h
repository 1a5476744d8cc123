#pragma once

#include <functional>

#include "core/types.h"
#include "params.h"

namespace salseg {

// A scalar objective built on a fresh tape from the attention leaf. The
// gradient is taken at the attention map and deliberately stops there: the
// leaf holds a detached copy of the attention values, so nothing propagates
// further upstream.
using SaliencyObjective = std::function<Tape::Var(Tape&, Tape::Var attn)>;

// d(objective)/d(attn) as a [HW, N_C] tensor. Throws GradientError when the
// objective's graph never touches the attention leaf.
Tensor saliency_gradient(const AttentionMap& attn, const SaliencyObjective& objective);

// S = relu(dObj/dA) * A reshaped to [H, W, N_C]; one objective for the whole
// map.
SaliencyStack compute_saliency(const AttentionMap& attn, int grid_h, int grid_w,
                               const SaliencyObjective& objective);

// Per-class gradients: class n uses objective_for_class(n) and keeps column n
// of the resulting gradient.
SaliencyStack compute_saliency_per_class(
    const AttentionMap& attn, int grid_h, int grid_w,
    const std::function<SaliencyObjective(int cls)>& objective_for_class);

}  // namespace salseg

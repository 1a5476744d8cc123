#pragma once

#include <utility>

#include "core/types.h"

namespace salseg {

// Top-k tokens per class by score; ties break toward the lowest flattened
// token index. scores is [HW, N_C].
TokenPartition partition_from_scores(const Tensor& scores, int k);

// Scores come from the saliency maps, raw and unnormalized: top-k is
// rank-based, so monotone rescaling could not change the result.
TokenPartition select_tokens(const SaliencyStack& sal, int k);

// Zero-fill masking: C_f keeps foreground positions, C_b the complement, and
// C_f + C_b == C exactly. Both outputs stay in stage raw.
std::pair<CorrelationVolume, CorrelationVolume> split_volume(const CorrelationVolume& corr,
                                                             const TokenPartition& part);

}  // namespace salseg

#pragma once

#include <random>
#include <vector>

#include "core/config.h"
#include "core/types.h"
#include "params.h"

namespace salseg {

// Matched / not-matched regression head. The joint representation of one
// (image, class) pair is that class's attention column over the HW tokens.
inline constexpr int kItmHidden = 32;
inline constexpr int kMatchedIndex = 0;  // logit 0 = matched, 1 = not matched

void init_itm_head(ParamStore& store, const PipelineConfig& cfg, std::mt19937_64& rng);

// rows: one attention column per (image, class) pair -> 2-class logits.
Tape::Var itm_logits(Binder& bind, Tape::Var attn_cols);

// Probability of "matched" for a single attention column var [1, HW].
Tape::Var itm_match_score(Binder& bind, Tape::Var attn_col);

struct ItmBatch {
    std::vector<int> pair_class;  // class index per pair
    Tensor onehot;                // [n_pairs, 2]; row (1,0) = matched
};

// Throws LabelError unless every label row is one-hot.
void check_one_hot(const Tensor& labels);

// Mean cross-entropy over the batch pairs; columns are gathered from the
// [HW, N_C] attention var so the loss trains the attention stack.
Tape::Var itm_loss_forward(Binder& bind, Tape::Var attn, const ItmBatch& batch);

// Value-level op over a finished attention map.
double itm_loss(const AttentionMap& attn, const ItmBatch& batch, const ParamStore& store);

}  // namespace salseg

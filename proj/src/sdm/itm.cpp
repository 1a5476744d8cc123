#include "sdm/itm.h"

#include "core/errors.h"

namespace salseg {

void init_itm_head(ParamStore& store, const PipelineConfig& cfg, std::mt19937_64& rng) {
    store.add("sdm.itm.w1", xavier_init({cfg.tokens(), kItmHidden}, rng));
    store.add("sdm.itm.b1", Tensor({kItmHidden}));
    store.add("sdm.itm.w2", xavier_init({kItmHidden, 2}, rng));
    store.add("sdm.itm.b2", Tensor({2}));
}

Tape::Var itm_logits(Binder& bind, Tape::Var attn_cols) {
    Tape& t = bind.tape();
    Tape::Var h = t.relu(t.linear(attn_cols, bind("sdm.itm.w1"), bind("sdm.itm.b1")));
    return t.linear(h, bind("sdm.itm.w2"), bind("sdm.itm.b2"));
}

Tape::Var itm_match_score(Binder& bind, Tape::Var attn_col) {
    Tape& t = bind.tape();
    Tape::Var probs = t.softmax_rows(itm_logits(bind, attn_col));
    return t.sum(t.slice_cols(probs, kMatchedIndex, kMatchedIndex + 1));
}

void check_one_hot(const Tensor& labels) {
    if (labels.ndim() != 2) throw LabelError("labels must be [n_pairs, 2]");
    for (int i = 0; i < labels.dim(0); ++i) {
        int ones = 0;
        for (int j = 0; j < labels.dim(1); ++j) {
            const double v = labels.at(i, j);
            if (v == 1.0) {
                ++ones;
            } else if (v != 0.0) {
                throw LabelError("label row " + std::to_string(i) + " is not one-hot");
            }
        }
        if (ones != 1) throw LabelError("label row " + std::to_string(i) + " is not one-hot");
    }
}

Tape::Var itm_loss_forward(Binder& bind, Tape::Var attn, const ItmBatch& batch) {
    Tape& t = bind.tape();
    check_one_hot(batch.onehot);
    if (batch.onehot.dim(0) != static_cast<int>(batch.pair_class.size())) {
        throw LabelError("label rows do not match pair count");
    }
    Tape::Var cols = t.gather_rows(t.transpose(attn), batch.pair_class);  // [n_pairs, HW]
    return t.ce_mean_rows(itm_logits(bind, cols), batch.onehot);
}

double itm_loss(const AttentionMap& attn, const ItmBatch& batch, const ParamStore& store) {
    Tape tape;
    Binder bind(tape, store, /*trainable=*/false);
    Tape::Var a = tape.constant(attn.values);
    return tape.val(itm_loss_forward(bind, a, batch))[0];
}

}  // namespace salseg

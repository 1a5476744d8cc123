#include "hrm/fuse.h"

#include "core/errors.h"

namespace salseg {

void init_gate(ParamStore& store, const std::string& branch_prefix, int d, std::mt19937_64& rng) {
    const std::string p = branch_prefix + "gate.";
    store.add(p + "w1", xavier_init({2 * d, d}, rng));
    store.add(p + "b1", Tensor({d}));
    store.add(p + "w2", xavier_init({d, d}, rng));
    store.add(p + "b2", Tensor({d}));
}

Tape::Var fuse_gate_forward(Binder& bind, const std::string& branch_prefix, Tape::Var category_row,
                            Tape::Var semantic_row) {
    Tape& t = bind.tape();
    const std::string p = branch_prefix + "gate.";
    Tape::Var cat = t.concat_cols(category_row, semantic_row);  // [1, 2D]
    Tape::Var h = t.relu(t.linear(cat, bind(p + "w1"), bind(p + "b1")));
    return t.sigmoid(t.linear(h, bind(p + "w2"), bind(p + "b2")));
}

CorrelationVolume fuse(const CorrelationVolume& c_prime, const PrototypeSet& protos,
                       const ParamStore& store) {
    if (c_prime.stage != VolumeStage::pixel) {
        throw ValidationError("fuse expects a pixel-stage volume, got stage " +
                              std::string(stage_name(c_prime.stage)));
    }
    const int h = c_prime.grid_h(), w = c_prime.grid_w(), nc = c_prime.n_classes();
    const int d = c_prime.channels();
    if (protos.category.dim(1) != nc || protos.category.dim(2) != d) {
        throw ShapeError("prototype dims do not match the volume");
    }
    const std::string prefix = protos.branch == Branch::foreground ? "hrm.fg." : "hrm.bg.";
    Tape tape;
    Binder bind(tape, store, /*trainable=*/false);
    Tape::Var sem = tape.constant(protos.semantic.reshaped({1, d}));
    Tensor out({h, w, nc, d});
    for (int n = 0; n < nc; ++n) {
        Tensor cat_row({1, d});
        for (int c = 0; c < d; ++c) cat_row.at(0, c) = protos.category.at(0, n, c);
        Tape::Var gate = fuse_gate_forward(bind, prefix, tape.constant(cat_row), sem);
        const Tensor& g = tape.val(gate);
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
                for (int c = 0; c < d; ++c) {
                    out.at(i, j, n, c) = c_prime.values.at(i, j, n, c) * g.at(0, c);
                }
            }
        }
    }
    return CorrelationVolume::make(std::move(out), VolumeStage::fused);
}

}  // namespace salseg

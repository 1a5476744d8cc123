#include "hrm/prototypes.h"

#include "core/errors.h"

namespace salseg {

void init_prototypes(ParamStore& store, const std::string& branch_prefix, int d,
                     std::mt19937_64& rng) {
    for (const char* kind : {"cat.avg.", "cat.max.", "sem.avg.", "sem.max."}) {
        const std::string p = branch_prefix + kind;
        store.add(p + "w1", xavier_init({d, d}, rng));
        store.add(p + "b1", Tensor({d}));
        store.add(p + "w2", xavier_init({d, d}, rng));
        store.add(p + "b2", Tensor({d}));
    }
}

Tape::Var mlp2_forward(Binder& bind, const std::string& prefix, Tape::Var x) {
    Tape& t = bind.tape();
    Tape::Var h = t.relu(t.linear(x, bind(prefix + "w1"), bind(prefix + "b1")));
    return t.linear(h, bind(prefix + "w2"), bind(prefix + "b2"));
}

Tape::Var category_prototype_forward(Binder& bind, const std::string& branch_prefix,
                                     const std::vector<Tape::Var>& class_rows,
                                     const std::vector<std::vector<int>>& visible_idx) {
    Tape& t = bind.tape();
    if (class_rows.size() != visible_idx.size()) {
        throw ShapeError("category prototypes: class count mismatch");
    }
    Tape::Var stacked = -1;
    Tape::Var avg_all = -1, max_all = -1;
    for (size_t n = 0; n < class_rows.size(); ++n) {
        if (visible_idx[n].empty()) {
            throw EmptyBranchError("class " + std::to_string(n) +
                                   " has no visible tokens in this branch");
        }
        Tape::Var vis = t.gather_rows(class_rows[n], visible_idx[n]);
        Tape::Var avg = t.col_mean(vis);  // [1, D]
        Tape::Var mx = t.col_max(vis);    // [1, D]
        avg_all = (n == 0) ? avg : t.concat_cols(avg_all, avg);
        max_all = (n == 0) ? mx : t.concat_cols(max_all, mx);
    }
    const int nc = static_cast<int>(class_rows.size());
    const int d = t.val(class_rows[0]).dim(1);
    // [1, N_C*D] -> [N_C, D] so the MLPs run on all classes at once
    Tape::Var avg_rows = t.reshape(avg_all, {nc, d});
    Tape::Var max_rows = t.reshape(max_all, {nc, d});
    stacked = t.add(mlp2_forward(bind, branch_prefix + "cat.avg.", avg_rows),
                    mlp2_forward(bind, branch_prefix + "cat.max.", max_rows));
    return stacked;  // [N_C, D]
}

Tape::Var semantic_prototype_forward(Binder& bind, const std::string& branch_prefix,
                                     Tape::Var category) {
    Tape& t = bind.tape();
    Tape::Var avg = t.col_mean(category);  // over the class axis
    Tape::Var mx = t.col_max(category);
    return t.add(mlp2_forward(bind, branch_prefix + "sem.avg.", avg),
                 mlp2_forward(bind, branch_prefix + "sem.max.", mx));  // [1, D]
}

namespace {

const std::string& branch_prefix_of(Branch b) {
    static const std::string fg = "hrm.fg.", bg = "hrm.bg.";
    return b == Branch::foreground ? fg : bg;
}

}  // namespace

Tensor category_prototype(const CorrelationVolume& c_prime, const TokenPartition& part,
                          Branch branch, const ParamStore& store) {
    if (c_prime.stage != VolumeStage::pixel) {
        throw ValidationError("category_prototype expects a pixel-stage volume, got stage " +
                              std::string(stage_name(c_prime.stage)));
    }
    const int h = c_prime.grid_h(), w = c_prime.grid_w(), nc = c_prime.n_classes();
    const int d = c_prime.channels();
    Tape tape;
    Binder bind(tape, store, /*trainable=*/false);
    Tensor rows = volume_to_rows(c_prime.values);
    std::vector<Tape::Var> class_rows;
    std::vector<std::vector<int>> visible;
    for (int n = 0; n < nc; ++n) {
        Tensor cls({h * w, d});
        for (int t = 0; t < h * w; ++t) {
            for (int c = 0; c < d; ++c) cls.at(t, c) = rows.at(n * h * w + t, c);
        }
        class_rows.push_back(tape.constant(cls));
        visible.push_back(branch == Branch::foreground ? part.fg_tokens(n) : part.bg_tokens(n));
    }
    Tape::Var p = category_prototype_forward(bind, branch_prefix_of(branch), class_rows, visible);
    return tape.val(p).reshaped({1, nc, d});
}

Tensor semantic_prototype(const Tensor& category, Branch branch, const ParamStore& store) {
    if (category.ndim() != 3 || category.dim(0) != 1) {
        throw ShapeError("category prototypes must be [1,N_C,D]");
    }
    const int nc = category.dim(1), d = category.dim(2);
    Tape tape;
    Binder bind(tape, store, /*trainable=*/false);
    Tape::Var cat = tape.constant(category.reshaped({nc, d}));
    Tape::Var p = semantic_prototype_forward(bind, branch_prefix_of(branch), cat);
    return tape.val(p).reshaped({1, 1, d});
}

}  // namespace salseg

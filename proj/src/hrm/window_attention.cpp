#include "hrm/window_attention.h"

#include <cmath>

#include "core/errors.h"

namespace salseg {

void init_window_block(ParamStore& store, const std::string& prefix, int d,
                       std::mt19937_64& rng) {
    store.add(prefix + "wq", xavier_init({d, d}, rng));
    store.add(prefix + "wk", xavier_init({d, d}, rng));
    // value/out near identity keeps the block close to pass-through at init
    store.add(prefix + "wv", near_identity_init(d, 0.05, rng));
    store.add(prefix + "wo", near_identity_init(d, 0.05, rng));
}

std::vector<std::vector<int>> window_index_sets(int grid_h, int grid_w, int window, int offset) {
    std::vector<std::vector<int>> sets;
    for (int r0 = -offset; r0 < grid_h; r0 += window) {
        for (int c0 = -offset; c0 < grid_w; c0 += window) {
            std::vector<int> idx;
            for (int r = std::max(r0, 0); r < std::min(r0 + window, grid_h); ++r) {
                for (int c = std::max(c0, 0); c < std::min(c0 + window, grid_w); ++c) {
                    idx.push_back(r * grid_w + c);
                }
            }
            if (!idx.empty()) sets.push_back(std::move(idx));
        }
    }
    return sets;
}

Tape::Var window_block_forward(Binder& bind, const std::string& prefix, Tape::Var x, int grid_h,
                               int grid_w, const std::vector<uint8_t>& visible, int window,
                               int offset) {
    Tape& t = bind.tape();
    const int d = t.val(x).dim(1);
    if (t.val(x).dim(0) != grid_h * grid_w) {
        throw ShapeError("window block token count does not match the grid");
    }
    if (visible.size() != static_cast<size_t>(grid_h * grid_w)) {
        throw ShapeError("visibility mask size does not match the grid");
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    Tape::Var out = x;
    for (const auto& win : window_index_sets(grid_h, grid_w, window, offset)) {
        std::vector<int> idx;
        for (int tok : win) {
            if (visible[static_cast<size_t>(tok)]) idx.push_back(tok);
        }
        if (idx.empty()) continue;  // all-masked window: identity
        Tape::Var rows = t.gather_rows(x, idx);
        Tape::Var q = t.matmul(rows, bind(prefix + "wq"));
        Tape::Var k = t.matmul(rows, bind(prefix + "wk"));
        Tape::Var v = t.matmul(rows, bind(prefix + "wv"));
        Tape::Var probs = t.softmax_rows(t.scale(t.matmul(q, t.transpose(k)), scale));
        Tape::Var o = t.matmul(t.matmul(probs, v), bind(prefix + "wo"));
        out = t.row_update(out, o, idx);
    }
    return out;
}

Tape::Var refine_tokens_forward(Binder& bind, const std::string& prefix, Tape::Var x, int grid_h,
                                int grid_w, const std::vector<uint8_t>& visible, int window) {
    Tape::Var mid = window_block_forward(bind, prefix + "block0.", x, grid_h, grid_w, visible,
                                         window, 0);
    return window_block_forward(bind, prefix + "block1.", mid, grid_h, grid_w, visible, window,
                                window / 2);
}

void init_pixel_refine(ParamStore& store, const std::string& branch_prefix, int d,
                       std::mt19937_64& rng) {
    init_window_block(store, branch_prefix + "block0.", d, rng);
    init_window_block(store, branch_prefix + "block1.", d, rng);
}

CorrelationVolume pixel_refine(const CorrelationVolume& c_branch, const TokenPartition& part,
                               Branch branch, const ParamStore& store, const PipelineConfig& cfg) {
    if (c_branch.stage != VolumeStage::raw) {
        throw ValidationError("pixel_refine expects a raw-stage volume, got stage " +
                              std::string(stage_name(c_branch.stage)));
    }
    const int h = c_branch.grid_h(), w = c_branch.grid_w(), nc = c_branch.n_classes();
    if (part.tokens != h * w || part.n_classes != nc) {
        throw ShapeError("partition dims do not match the volume");
    }
    const std::string prefix =
        branch == Branch::foreground ? "hrm.fg.pixel." : "hrm.bg.pixel.";
    Tape tape;
    Binder bind(tape, store, /*trainable=*/false);
    Tensor rows = volume_to_rows(c_branch.values);
    Tensor out_rows({rows.dim(0), rows.dim(1)});
    for (int n = 0; n < nc; ++n) {
        std::vector<uint8_t> visible(static_cast<size_t>(h * w), 0);
        for (int t = 0; t < h * w; ++t) {
            const bool fg = part.is_fg(t, n);
            visible[static_cast<size_t>(t)] = (branch == Branch::foreground) == fg ? 1 : 0;
        }
        Tensor cls_rows({h * w, rows.dim(1)});
        for (int t = 0; t < h * w; ++t) {
            for (int c = 0; c < rows.dim(1); ++c) cls_rows.at(t, c) = rows.at(n * h * w + t, c);
        }
        Tape::Var x = tape.constant(cls_rows);
        Tape::Var refined =
            refine_tokens_forward(bind, prefix, x, h, w, visible, cfg.window_size);
        const Tensor& rv = tape.val(refined);
        for (int t = 0; t < h * w; ++t) {
            for (int c = 0; c < rows.dim(1); ++c) out_rows.at(n * h * w + t, c) = rv.at(t, c);
        }
    }
    return CorrelationVolume::make(rows_to_volume(out_rows, h, w, nc), VolumeStage::pixel);
}

}  // namespace salseg

#include "decode/aggregate.h"

#include <cmath>

#include "core/errors.h"
#include "hrm/window_attention.h"

namespace salseg {

const char* agg_name(AggKind k) {
    switch (k) {
        case AggKind::weighted: return "weighted";
        case AggKind::hard: return "hard";
        case AggKind::attention: return "attn";
    }
    return "?";
}

void init_aggregator(ParamStore& store, const PipelineConfig& cfg, std::mt19937_64& rng) {
    const int gate_w = cfg.gate_mode == GateMode::per_channel ? cfg.d_corr : 1;
    store.add("agg.gate", Tensor({cfg.n_classes, gate_w}));  // zero logits: gate starts at 0.5
    store.add("agg.attnq", xavier_init({cfg.d_corr, 1}, rng));
    init_window_block(store, "agg.smooth.block0.", cfg.d_corr, rng);
    init_window_block(store, "agg.smooth.block1.", cfg.d_corr, rng);
}

Tape::Var aggregate_class_forward(Binder& bind, const PipelineConfig& cfg, AggKind kind, int cls,
                                  Tape::Var cf, Tape::Var cb) {
    Tape& t = bind.tape();
    const int d = t.val(cf).dim(1);
    switch (kind) {
        case AggKind::hard:
            // off-branch entries are zero, so plain addition is the
            // mask-index reorganization
            return t.add(cf, cb);
        case AggKind::weighted: {
            Tape::Var logits = t.gather_rows(bind("agg.gate"), {cls});  // [1, gate_w]
            Tape::Var gate = t.sigmoid(logits);
            if (cfg.gate_mode == GateMode::per_channel) {
                Tape::Var inv = t.sub(t.constant(Tensor::full({1, d}, 1.0)), gate);
                return t.add(t.mul_rowvec(cf, gate), t.mul_rowvec(cb, inv));
            }
            Tape::Var inv = t.sub(t.constant(Tensor::full({1, 1}, 1.0)), gate);
            return t.add(t.mul_scalar_var(cf, gate), t.mul_scalar_var(cb, inv));
        }
        case AggKind::attention: {
            const double scale = 1.0 / std::sqrt(static_cast<double>(d));
            Tape::Var q = bind("agg.attnq");  // [D, 1]
            Tape::Var sf = t.scale(t.matmul(cf, q), scale);  // [HW, 1]
            Tape::Var sb = t.scale(t.matmul(cb, q), scale);
            Tape::Var weights = t.softmax_rows(t.concat_cols(sf, sb));  // [HW, 2]
            Tape::Var alpha = t.slice_cols(weights, 0, 1);
            Tape::Var beta = t.slice_cols(weights, 1, 2);
            return t.add(t.mul_colvec(cf, alpha), t.mul_colvec(cb, beta));
        }
    }
    throw ValidationError("unknown aggregation kind");
}

Tape::Var smooth_forward(Binder& bind, const PipelineConfig& cfg, Tape::Var x) {
    const int hw = bind.tape().val(x).dim(0);
    std::vector<uint8_t> all(static_cast<size_t>(hw), 1);
    return refine_tokens_forward(bind, "agg.smooth.", x, cfg.grid_h, cfg.grid_w, all,
                                 cfg.window_size);
}

namespace {

void check_fused_inputs(const CorrelationVolume& cf, const CorrelationVolume& cb,
                        const TokenPartition& part) {
    if (cf.stage != VolumeStage::fused || cb.stage != VolumeStage::fused) {
        throw ValidationError("aggregate expects fused-stage volumes");
    }
    if (!cf.values.same_shape(cb.values)) throw ShapeError("branch volume shapes differ");
    const int h = cf.grid_h(), w = cf.grid_w(), nc = cf.n_classes(), d = cf.channels();
    if (part.tokens != h * w || part.n_classes != nc) {
        throw ShapeError("partition dims do not match the volumes");
    }
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            const int t = i * w + j;
            for (int n = 0; n < nc; ++n) {
                const bool fg = part.is_fg(t, n);
                for (int c = 0; c < d; ++c) {
                    const double off = fg ? cb.values.at(i, j, n, c) : cf.values.at(i, j, n, c);
                    if (off != 0.0) {
                        throw PartitionMismatchError(
                            "branch volume carries a value off its branch at token " +
                            std::to_string(t) + ", class " + std::to_string(n));
                    }
                }
            }
        }
    }
}

CorrelationVolume run_aggregate(AggKind kind, const CorrelationVolume& cf,
                                const CorrelationVolume& cb, const TokenPartition& part,
                                const ParamStore& store, const PipelineConfig& cfg) {
    check_fused_inputs(cf, cb, part);
    const int h = cf.grid_h(), w = cf.grid_w(), nc = cf.n_classes(), d = cf.channels();
    Tape tape;
    Binder bind(tape, store, /*trainable=*/false);
    Tensor cf_rows = volume_to_rows(cf.values);
    Tensor cb_rows = volume_to_rows(cb.values);
    Tensor out_rows({nc * h * w, d});
    for (int n = 0; n < nc; ++n) {
        Tensor f({h * w, d}), b({h * w, d});
        for (int t = 0; t < h * w; ++t) {
            for (int c = 0; c < d; ++c) {
                f.at(t, c) = cf_rows.at(n * h * w + t, c);
                b.at(t, c) = cb_rows.at(n * h * w + t, c);
            }
        }
        Tape::Var merged = aggregate_class_forward(bind, cfg, kind, n, tape.constant(f),
                                                   tape.constant(b));
        Tape::Var smoothed = smooth_forward(bind, cfg, merged);
        const Tensor& sv = tape.val(smoothed);
        for (int t = 0; t < h * w; ++t) {
            for (int c = 0; c < d; ++c) out_rows.at(n * h * w + t, c) = sv.at(t, c);
        }
    }
    return CorrelationVolume::make(rows_to_volume(out_rows, h, w, nc), VolumeStage::aggregated);
}

}  // namespace

CorrelationVolume aggregate(const CorrelationVolume& cf, const CorrelationVolume& cb,
                            const TokenPartition& part, const ParamStore& store,
                            const PipelineConfig& cfg) {
    return run_aggregate(AggKind::weighted, cf, cb, part, store, cfg);
}

CorrelationVolume hard_aggregate(const CorrelationVolume& cf, const CorrelationVolume& cb,
                                 const TokenPartition& part, const ParamStore& store,
                                 const PipelineConfig& cfg) {
    return run_aggregate(AggKind::hard, cf, cb, part, store, cfg);
}

CorrelationVolume attn_aggregate(const CorrelationVolume& cf, const CorrelationVolume& cb,
                                 const TokenPartition& part, const ParamStore& store,
                                 const PipelineConfig& cfg) {
    return run_aggregate(AggKind::attention, cf, cb, part, store, cfg);
}

}  // namespace salseg

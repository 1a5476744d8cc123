#include "model.h"

#include <algorithm>
#include <chrono>

#include "core/errors.h"
#include "core/rng.h"
#include "decode/decoder.h"
#include "hrm/fuse.h"
#include "hrm/prototypes.h"
#include "hrm/window_attention.h"
#include "sdm/correlation.h"
#include "sdm/cross_attention.h"
#include "sdm/itm.h"
#include "sdm/partition.h"
#include "sdm/saliency.h"

namespace salseg {

namespace {

double tick() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

const char* disentangle_name(Variant::Disentangle d) {
    switch (d) {
        case Variant::Disentangle::none: return "none";
        case Variant::Disentangle::saliency: return "saliency";
        case Variant::Disentangle::token_supervised: return "token_supervised";
        case Variant::Disentangle::class_taxonomy: return "class_taxonomy";
    }
    return "?";
}

}  // namespace

std::string Variant::describe() const {
    std::string s = "disentangle=";
    s += disentangle_name(disentangle);
    s += pixel_on ? " pixel=on" : " pixel=off";
    s += category_on ? " category=on" : " category=off";
    s += semantic_on ? " semantic=on" : " semantic=off";
    s += " agg=";
    s += agg_name(agg);
    return s;
}

const std::vector<int32_t>& ThrowingLabelProvider::grid_labels() const {
    throw LabelError("ground-truth access on a label-free path");
}
const std::vector<int32_t>& ThrowingLabelProvider::out_labels() const {
    throw LabelError("ground-truth access on a label-free path");
}

Model::Model(PipelineConfig cfg, Variant variant)
    : cfg_(validate_config(cfg)), variant_(variant) {}

void Model::init_params() {
    auto rng = make_rng(static_cast<uint64_t>(cfg_.seed), 0x1417);
    const int d = cfg_.d_corr;
    init_cross_attention(params_, cfg_, rng);
    init_itm_head(params_, cfg_, rng);
    init_correlation(params_, cfg_, rng);
    params_.add("sdm.toksup.w", xavier_init({2, 1}, rng));
    params_.add("sdm.toksup.b", Tensor({1}));
    for (const char* bp : {"hrm.fg.", "hrm.bg."}) {
        init_pixel_refine(params_, std::string(bp) + "pixel.", d, rng);
        init_prototypes(params_, bp, d, rng);
        init_gate(params_, bp, d, rng);
    }
    init_aggregator(params_, cfg_, rng);
    init_decoder(params_, cfg_, rng);
}

void Model::set_taxonomy(std::map<std::string, Branch> taxonomy) {
    taxonomy_ = std::move(taxonomy);
}

ForwardResult Model::forward(Binder& bind, const ForwardInputs& in, const LabelProvider* labels,
                             std::mt19937_64* itm_rng, bool want_trace) const {
    Tape& tape = bind.tape();
    const int h = cfg_.grid_h, w = cfg_.grid_w, hw = h * w;
    const int nc = cfg_.n_classes, d = cfg_.d_corr;
    if (in.pair.grid_h() != h || in.pair.grid_w() != w || in.pair.n_classes() != nc ||
        in.pair.d_enc() != cfg_.d_enc) {
        throw ShapeError("embedding pair does not match config");
    }

    ForwardResult res;
    auto trace = [&](const char* s) {
        if (want_trace) res.trace.emplace_back(s);
    };
    const double t_start = tick();
    double t0 = t_start;

    // cross attention
    Tape::Var text = tape.constant(in.pair.text);
    Tape::Var image = tape.constant(in.pair.image.reshaped({hw, cfg_.d_enc}));
    Tape::Var attn = cross_attention_forward(bind, cfg_, text, image);
    res.attention = AttentionMap::make(tape.val(attn));
    res.times.cross_attend = tick() - t0;
    trace("cross_attend");

    // class presence, training only
    std::vector<char> present;
    if (labels) {
        present.assign(static_cast<size_t>(nc), 0);
        for (int32_t c : labels->grid_labels()) present[static_cast<size_t>(c)] = 1;
    }

    // auxiliary matching loss on the main tape (trains head and attention)
    if (labels && variant_.disentangle == Variant::Disentangle::saliency) {
        t0 = tick();
        if (!itm_rng) throw ValidationError("training forward needs an rng for pair sampling");
        ItmBatch batch;
        std::vector<int> absent;
        for (int n = 0; n < nc; ++n) {
            if (present[static_cast<size_t>(n)]) {
                batch.pair_class.push_back(n);
            } else {
                absent.push_back(n);
            }
        }
        const int n_pos = static_cast<int>(batch.pair_class.size());
        std::shuffle(absent.begin(), absent.end(), *itm_rng);
        const int n_neg = std::min<int>(n_pos, static_cast<int>(absent.size()));
        for (int i = 0; i < n_neg; ++i) batch.pair_class.push_back(absent[static_cast<size_t>(i)]);
        batch.onehot = Tensor({static_cast<int>(batch.pair_class.size()), 2});
        for (int i = 0; i < n_pos; ++i) batch.onehot.at(i, kMatchedIndex) = 1.0;
        for (int i = n_pos; i < batch.onehot.dim(0); ++i) batch.onehot.at(i, 1 - kMatchedIndex) = 1.0;
        res.aux_loss = itm_loss_forward(bind, attn, batch);
        res.times.itm = tick() - t0;
        trace("itm_loss");
    }

    // saliency and the token partition
    std::vector<std::vector<int>> vis_f, vis_b;
    if (variant_.disentangle == Variant::Disentangle::saliency) {
        t0 = tick();
        const bool use_loss_grad =
            labels && cfg_.saliency_train_objective == SaliencyTrainObjective::loss;
        auto objective_for_class = [&](int cls) -> SaliencyObjective {
            if (use_loss_grad) {
                const bool matched = present[static_cast<size_t>(cls)] != 0;
                return [this, cls, matched](Tape& mt, Tape::Var a) {
                    Binder mb(mt, params_, false);
                    Tape::Var col = mt.gather_rows(mt.transpose(a), {cls});
                    Tensor onehot({1, 2});
                    onehot.at(0, matched ? kMatchedIndex : 1 - kMatchedIndex) = 1.0;
                    return mt.ce_mean_rows(itm_logits(mb, col), onehot);
                };
            }
            // gradients of the regressed matching score; inference always
            // lands here, so the partition matches across train and eval
            return [this, cls](Tape& mt, Tape::Var a) {
                Binder mb(mt, params_, false);
                Tape::Var col = mt.gather_rows(mt.transpose(a), {cls});
                return itm_match_score(mb, col);
            };
        };
        if (cfg_.saliency_grad_mode == SaliencyGradMode::per_class) {
            res.saliency = compute_saliency_per_class(res.attention, h, w, objective_for_class);
        } else {
            SaliencyObjective batch_obj = [&](Tape& mt, Tape::Var a) {
                Tape::Var acc = -1;
                for (int n = 0; n < nc; ++n) {
                    Tape::Var o = objective_for_class(n)(mt, a);
                    acc = (n == 0) ? o : mt.add(acc, o);
                }
                return mt.scale(acc, 1.0 / nc);
            };
            res.saliency = compute_saliency(res.attention, h, w, batch_obj);
        }
        res.has_saliency = true;
        res.times.saliency = tick() - t0;
        trace("saliency");

        t0 = tick();
        res.partition = select_tokens(res.saliency, cfg_.k_fg);
        res.has_partition = true;
        res.times.partition = tick() - t0;
        trace("select_tokens");
    }

    // correlation volume
    t0 = tick();
    Tensor cosine = cosine_similarity(in.pair);
    Tape::Var corr_rows = correlation_forward(bind, cfg_, cosine);
    std::vector<Tape::Var> cls_vol(static_cast<size_t>(nc));
    for (int n = 0; n < nc; ++n) {
        std::vector<int> idx(static_cast<size_t>(hw));
        for (int t = 0; t < hw; ++t) idx[static_cast<size_t>(t)] = n * hw + t;
        cls_vol[static_cast<size_t>(n)] = tape.gather_rows(corr_rows, idx);
    }
    res.times.correlation = tick() - t0;
    trace("correlation");

    // token-supervised partition needs the correlation cosine
    if (variant_.disentangle == Variant::Disentangle::token_supervised) {
        t0 = tick();
        std::vector<Tape::Var> score(static_cast<size_t>(nc));
        Tensor score_val({hw, nc});
        Tape::Var aux = -1;
        for (int n = 0; n < nc; ++n) {
            Tensor cos_col({hw, 1});
            for (int t = 0; t < hw; ++t) cos_col.at(t, 0) = cosine.at(t, n);
            Tape::Var feats = tape.concat_cols(tape.constant(cos_col),
                                               tape.slice_cols(attn, n, n + 1));
            score[static_cast<size_t>(n)] =
                tape.linear(feats, bind("sdm.toksup.w"), bind("sdm.toksup.b"));
            for (int t = 0; t < hw; ++t) {
                score_val.at(t, n) = tape.val(score[static_cast<size_t>(n)]).at(t, 0);
            }
            if (labels) {
                Tensor target({hw});
                for (int t = 0; t < hw; ++t) {
                    target[t] = labels->grid_labels()[static_cast<size_t>(t)] == n ? 1.0 : 0.0;
                }
                Tape::Var b = tape.bce_logits_mean(score[static_cast<size_t>(n)], target);
                aux = (n == 0) ? b : tape.add(aux, b);
            }
        }
        if (labels) res.aux_loss = tape.scale(aux, 1.0 / nc);
        res.partition = partition_from_scores(score_val, cfg_.k_fg);
        res.has_partition = true;
        res.times.partition += tick() - t0;
        trace("token_supervision");
    }

    // branch refinement
    auto process_branch = [&](Branch br, const std::vector<Tape::Var>& vols,
                              const std::vector<std::vector<int>>& vis) {
        const std::string bp = br == Branch::foreground ? "hrm.fg." : "hrm.bg.";
        std::vector<Tape::Var> cur = vols;
        if (variant_.pixel_on) {
            const double ts = tick();
            for (size_t i = 0; i < cur.size(); ++i) {
                std::vector<uint8_t> mask(static_cast<size_t>(hw), 0);
                for (int t : vis[i]) mask[static_cast<size_t>(t)] = 1;
                cur[i] = refine_tokens_forward(bind, bp + "pixel.", cur[i], h, w, mask,
                                               cfg_.window_size);
            }
            res.times.pixel += tick() - ts;
            trace("pixel_refine");
        }
        if (variant_.category_on) {
            double ts = tick();
            Tape::Var cat = category_prototype_forward(bind, bp, cur, vis);
            trace("category_prototype");
            Tape::Var sem;
            if (variant_.semantic_on) {
                sem = semantic_prototype_forward(bind, bp, cat);
                trace("semantic_prototype");
            } else {
                sem = tape.constant(Tensor({1, d}));
            }
            res.times.prototypes += tick() - ts;
            ts = tick();
            for (size_t i = 0; i < cur.size(); ++i) {
                Tape::Var cat_row = tape.gather_rows(cat, {static_cast<int>(i)});
                Tape::Var gate = fuse_gate_forward(bind, bp, cat_row, sem);
                cur[i] = tape.mul_rowvec(cur[i], gate);
            }
            res.times.fuse += tick() - ts;
            trace("fuse");
        }
        return cur;
    };

    std::vector<Tape::Var> ctilde(static_cast<size_t>(nc), -1);
    switch (variant_.disentangle) {
        case Variant::Disentangle::saliency:
        case Variant::Disentangle::token_supervised: {
            vis_f.resize(static_cast<size_t>(nc));
            vis_b.resize(static_cast<size_t>(nc));
            std::vector<Tape::Var> vols_f(static_cast<size_t>(nc)), vols_b(static_cast<size_t>(nc));
            for (int n = 0; n < nc; ++n) {
                vis_f[static_cast<size_t>(n)] = res.partition.fg_tokens(n);
                vis_b[static_cast<size_t>(n)] = res.partition.bg_tokens(n);
                Tensor mf({hw, 1}), mb({hw, 1});
                for (int t = 0; t < hw; ++t) {
                    const bool fg = res.partition.is_fg(t, n);
                    mf.at(t, 0) = fg ? 1.0 : 0.0;
                    mb.at(t, 0) = fg ? 0.0 : 1.0;
                }
                vols_f[static_cast<size_t>(n)] =
                    tape.mul_colvec(cls_vol[static_cast<size_t>(n)], tape.constant(mf));
                vols_b[static_cast<size_t>(n)] =
                    tape.mul_colvec(cls_vol[static_cast<size_t>(n)], tape.constant(mb));
            }
            trace("split_volume");
            std::vector<Tape::Var> fused_f = process_branch(Branch::foreground, vols_f, vis_f);
            std::vector<Tape::Var> fused_b = process_branch(Branch::background, vols_b, vis_b);
            const double ts = tick();
            for (int n = 0; n < nc; ++n) {
                Tape::Var merged =
                    aggregate_class_forward(bind, cfg_, variant_.agg, n,
                                            fused_f[static_cast<size_t>(n)],
                                            fused_b[static_cast<size_t>(n)]);
                ctilde[static_cast<size_t>(n)] = smooth_forward(bind, cfg_, merged);
            }
            res.times.aggregate += tick() - ts;
            trace("aggregate");
            trace("smooth");
            break;
        }
        case Variant::Disentangle::none: {
            std::vector<std::vector<int>> vis(static_cast<size_t>(nc));
            for (int n = 0; n < nc; ++n) {
                vis[static_cast<size_t>(n)].resize(static_cast<size_t>(hw));
                for (int t = 0; t < hw; ++t) vis[static_cast<size_t>(n)][static_cast<size_t>(t)] = t;
            }
            std::vector<Tape::Var> fused = process_branch(Branch::foreground, cls_vol, vis);
            const double ts = tick();
            for (int n = 0; n < nc; ++n) {
                ctilde[static_cast<size_t>(n)] = smooth_forward(bind, cfg_, fused[static_cast<size_t>(n)]);
            }
            res.times.aggregate += tick() - ts;
            trace("smooth");
            break;
        }
        case Variant::Disentangle::class_taxonomy: {
            if (!taxonomy_) throw TaxonomyError("class-taxonomy variant needs a taxonomy file");
            std::vector<int> ids_f, ids_b;
            for (int n = 0; n < nc; ++n) {
                auto it = taxonomy_->find(in.pair.class_names[static_cast<size_t>(n)]);
                if (it == taxonomy_->end()) {
                    throw TaxonomyError("taxonomy does not cover class `" +
                                        in.pair.class_names[static_cast<size_t>(n)] + "`");
                }
                (it->second == Branch::foreground ? ids_f : ids_b).push_back(n);
            }
            std::vector<int> all(static_cast<size_t>(hw));
            for (int t = 0; t < hw; ++t) all[static_cast<size_t>(t)] = t;
            for (Branch br : {Branch::foreground, Branch::background}) {
                const std::vector<int>& ids = br == Branch::foreground ? ids_f : ids_b;
                if (ids.empty()) continue;
                std::vector<Tape::Var> vols;
                std::vector<std::vector<int>> vis;
                for (int n : ids) {
                    vols.push_back(cls_vol[static_cast<size_t>(n)]);
                    vis.push_back(all);
                }
                std::vector<Tape::Var> fused = process_branch(br, vols, vis);
                for (size_t i = 0; i < ids.size(); ++i) {
                    ctilde[static_cast<size_t>(ids[i])] = smooth_forward(bind, cfg_, fused[i]);
                }
            }
            trace("smooth");
            break;
        }
    }

    // decode
    t0 = tick();
    Tape::Var fv = tape.constant(in.pair.image.reshaped({hw, cfg_.d_enc}));
    Tape::Var g1 = tape.constant(in.guid1.reshaped({hw, cfg_.d_enc}));
    Tape::Var g2 = tape.constant(in.guid2.reshaped({hw, cfg_.d_enc}));
    res.logits = decode_forward(bind, cfg_, ctilde, fv, g1, g2);
    res.output = SegmentationOutput::make(tape.val(res.logits).reshaped({4 * h, 4 * w, nc}));
    res.times.decode = tick() - t0;
    trace("decode");

    if (labels) {
        const std::vector<int32_t>& gt = labels->out_labels();
        if (gt.size() != static_cast<size_t>(16 * hw)) {
            throw ShapeError("output-resolution labels must have 16*HW entries");
        }
        Tensor onehot({16 * hw, nc});
        for (int i = 0; i < 16 * hw; ++i) onehot.at(i, gt[static_cast<size_t>(i)]) = 1.0;
        res.ce_loss = tape.ce_mean_rows(res.logits, onehot);
    }
    res.times.total = tick() - t_start;
    return res;
}

ForwardResult Model::infer(const ForwardInputs& in, bool want_trace) const {
    Tape tape;
    Binder bind(tape, params_, /*trainable=*/false);
    ForwardResult res = forward(bind, in, nullptr, nullptr, want_trace);
    res.logits = -1;  // the tape dies here; only values remain meaningful
    return res;
}

}  // namespace salseg

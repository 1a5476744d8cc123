#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "core/rng.h"
#include "decode/aggregate.h"
#include "decode/decoder.h"
#include "oracles/naive.h"
#include "sdm/partition.h"

using namespace salseg;

namespace {

PipelineConfig agg_cfg(int grid, int nc, int d) {
    PipelineConfig cfg;
    cfg.grid_h = cfg.grid_w = grid;
    cfg.n_classes = nc;
    cfg.d_corr = d;
    cfg.d_enc = 4;
    cfg.d_attn = 4;
    cfg.n_attn_heads = 1;
    cfg.k_fg = 1;
    cfg.window_size = 1;  // identity-friendly smoothing windows
    return cfg;
}

ParamStore agg_store(const PipelineConfig& cfg, uint64_t seed, bool identity_smooth) {
    ParamStore store;
    auto rng = make_rng(seed);
    init_aggregator(store, cfg, rng);
    if (identity_smooth) {
        for (const char* blk : {"agg.smooth.block0.", "agg.smooth.block1."}) {
            store.get(std::string(blk) + "wv") = Tensor::identity(cfg.d_corr);
            store.get(std::string(blk) + "wo") = Tensor::identity(cfg.d_corr);
        }
    }
    return store;
}

Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    for (int i = 0; i < t.numel(); ++i) t[i] = uniform(rng, -1.0, 1.0);
    return t;
}

struct BranchPair {
    CorrelationVolume fg;
    CorrelationVolume bg;
    TokenPartition part;
};

BranchPair random_branches(const PipelineConfig& cfg, std::mt19937_64& rng, int k) {
    const int h = cfg.grid_h, w = cfg.grid_w, nc = cfg.n_classes, d = cfg.d_corr;
    Tensor scores({h * w, nc});
    for (int i = 0; i < scores.numel(); ++i) scores[i] = uniform(rng, -1, 1);
    TokenPartition part = partition_from_scores(scores, k);
    Tensor fg({h, w, nc, d}), bg({h, w, nc, d});
    for (int t = 0; t < h * w; ++t) {
        for (int n = 0; n < nc; ++n) {
            for (int c = 0; c < d; ++c) {
                const double v = uniform(rng, -1, 1);
                (part.is_fg(t, n) ? fg : bg).at(t / w, t % w, n, c) = v;
            }
        }
    }
    return {CorrelationVolume::make(fg, VolumeStage::fused),
            CorrelationVolume::make(bg, VolumeStage::fused), part};
}

}  // namespace

TEST_CASE("gate forced to one keeps only the foreground branch") {
    auto cfg = agg_cfg(2, 2, 3);
    ParamStore store = agg_store(cfg, 61, true);
    store.get("agg.gate") = Tensor::full({2, 3}, 60.0);  // sigmoid -> 1
    auto rng = make_rng(62);
    BranchPair bp = random_branches(cfg, rng, 2);
    CorrelationVolume out = aggregate(bp.fg, bp.bg, bp.part, store, cfg);
    CHECK(out.stage == VolumeStage::aggregated);
    for (int i = 0; i < out.values.numel(); ++i) {
        CHECK(out.values[i] == doctest::Approx(bp.fg.values[i]).epsilon(1e-9));
    }
}

TEST_CASE("zero gate logits average the reassembled branches") {
    auto cfg = agg_cfg(2, 2, 3);
    ParamStore store = agg_store(cfg, 63, true);
    auto rng = make_rng(64);
    BranchPair bp = random_branches(cfg, rng, 1);
    CorrelationVolume out = aggregate(bp.fg, bp.bg, bp.part, store, cfg);
    for (int i = 0; i < out.values.numel(); ++i) {
        const double expect = 0.5 * (bp.fg.values[i] + bp.bg.values[i]);
        CHECK(out.values[i] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("weighted aggregation matches the per-token reassembly oracle") {
    auto cfg = agg_cfg(3, 2, 4);
    ParamStore store = agg_store(cfg, 65, true);
    auto rng = make_rng(66);
    Tensor logits = random_tensor({2, 4}, rng);
    store.get("agg.gate") = logits;
    BranchPair bp = random_branches(cfg, rng, 4);
    CorrelationVolume out = aggregate(bp.fg, bp.bg, bp.part, store, cfg);
    for (int n = 0; n < 2; ++n) {
        std::vector<double> gate(4);
        for (int c = 0; c < 4; ++c) gate[static_cast<size_t>(c)] = 1.0 / (1.0 + std::exp(-logits.at(n, c)));
        Tensor f({9, 4}), b({9, 4});
        for (int t = 0; t < 9; ++t) {
            for (int c = 0; c < 4; ++c) {
                f.at(t, c) = bp.fg.values.at(t / 3, t % 3, n, c);
                b.at(t, c) = bp.bg.values.at(t / 3, t % 3, n, c);
            }
        }
        Tensor expect = oracle::naive_reassemble(f, b, gate);
        for (int t = 0; t < 9; ++t) {
            for (int c = 0; c < 4; ++c) {
                CHECK(std::fabs(out.values.at(t / 3, t % 3, n, c) - expect.at(t, c)) < 1e-9);
            }
        }
    }
}

TEST_CASE("hard aggregation is the indicator-gate reassembly") {
    auto cfg = agg_cfg(2, 2, 3);
    ParamStore store = agg_store(cfg, 67, true);
    auto rng = make_rng(68);
    BranchPair bp = random_branches(cfg, rng, 2);
    CorrelationVolume out = hard_aggregate(bp.fg, bp.bg, bp.part, store, cfg);
    for (int t = 0; t < 4; ++t) {
        for (int n = 0; n < 2; ++n) {
            for (int c = 0; c < 3; ++c) {
                const double expect = bp.part.is_fg(t, n) ? bp.fg.values.at(t / 2, t % 2, n, c)
                                                          : bp.bg.values.at(t / 2, t % 2, n, c);
                CHECK(out.values.at(t / 2, t % 2, n, c) == doctest::Approx(expect).epsilon(1e-12));
            }
        }
    }
    // all-true mask keeps the foreground volume
    Tensor scores({4, 2});
    TokenPartition all = partition_from_scores(scores, 4);
    Tensor fgv = random_tensor({2, 2, 2, 3}, rng);
    CorrelationVolume f2 = CorrelationVolume::make(fgv, VolumeStage::fused);
    CorrelationVolume b2 = CorrelationVolume::make(Tensor({2, 2, 2, 3}), VolumeStage::fused);
    CorrelationVolume out2 = hard_aggregate(f2, b2, all, store, cfg);
    for (int i = 0; i < fgv.numel(); ++i) CHECK(out2.values[i] == doctest::Approx(fgv[i]));
}

TEST_CASE("attention aggregation is a convex combination of the branches") {
    auto cfg = agg_cfg(2, 2, 3);
    ParamStore store = agg_store(cfg, 69, true);
    auto rng = make_rng(70);
    BranchPair bp = random_branches(cfg, rng, 2);
    CorrelationVolume out = attn_aggregate(bp.fg, bp.bg, bp.part, store, cfg);
    for (int i = 0; i < out.values.numel(); ++i) {
        const double lo = std::min(bp.fg.values[i], bp.bg.values[i]);
        const double hi = std::max(bp.fg.values[i], bp.bg.values[i]);
        CHECK(out.values[i] >= lo - 1e-12);
        CHECK(out.values[i] <= hi + 1e-12);
    }
}

TEST_CASE("attention aggregation equals the two-way softmax by hand on one token") {
    auto cfg = agg_cfg(1, 2, 3);
    cfg.k_fg = 1;
    ParamStore store = agg_store(cfg, 71, true);
    auto rng = make_rng(72);
    Tensor scores({1, 2});
    TokenPartition part = partition_from_scores(scores, 1);  // the lone token is foreground
    Tensor fgv = random_tensor({1, 1, 2, 3}, rng);
    CorrelationVolume f = CorrelationVolume::make(fgv, VolumeStage::fused);
    CorrelationVolume b = CorrelationVolume::make(Tensor({1, 1, 2, 3}), VolumeStage::fused);
    CorrelationVolume out = attn_aggregate(f, b, part, store, cfg);
    const Tensor& q = store.get("agg.attnq");
    for (int n = 0; n < 2; ++n) {
        double sf = 0.0;
        for (int c = 0; c < 3; ++c) sf += fgv.at(0, 0, n, c) * q.at(c, 0);
        sf /= std::sqrt(3.0);
        const double alpha = std::exp(sf) / (std::exp(sf) + std::exp(0.0));
        for (int c = 0; c < 3; ++c) {
            CHECK(out.values.at(0, 0, n, c) ==
                  doctest::Approx(alpha * fgv.at(0, 0, n, c)).epsilon(1e-9));
        }
    }
}

TEST_CASE("branch volumes must honor the partition's zero pattern") {
    auto cfg = agg_cfg(2, 2, 3);
    ParamStore store = agg_store(cfg, 73, true);
    auto rng = make_rng(74);
    BranchPair bp = random_branches(cfg, rng, 2);
    Tensor bad = bp.fg.values;
    for (int t = 0; t < 4; ++t) {
        if (!bp.part.is_fg(t, 0)) {
            bad.at(t / 2, t % 2, 0, 0) = 1.0;  // foreground volume leaks off-branch
            break;
        }
    }
    CorrelationVolume poisoned = CorrelationVolume::make(bad, VolumeStage::fused);
    CHECK_THROWS_AS(aggregate(poisoned, bp.bg, bp.part, store, cfg), PartitionMismatchError);
}

TEST_CASE("aggregate rejects volumes of the wrong stage") {
    auto cfg = agg_cfg(2, 2, 3);
    ParamStore store = agg_store(cfg, 75, true);
    auto rng = make_rng(76);
    BranchPair bp = random_branches(cfg, rng, 2);
    CorrelationVolume raw = CorrelationVolume::make(bp.fg.values, VolumeStage::raw);
    CHECK_THROWS_AS(aggregate(raw, bp.bg, bp.part, store, cfg), ValidationError);
}

TEST_CASE("decoder output resolution is always four times the grid") {
    for (int grid : {12, 24}) {
        PipelineConfig cfg = agg_cfg(grid, 2, 2);
        cfg.d_enc = 3;
        ParamStore store;
        auto rng = make_rng(77);
        init_decoder(store, cfg, rng);
        auto rng2 = make_rng(78);
        Tensor vol = random_tensor({grid, grid, 2, 2}, rng2);
        Tensor image = random_tensor({grid, grid, 3}, rng2);
        for (int i = 0; i < image.numel(); ++i) image[i] += 0.2;  // keep norms away from zero
        Tensor text = random_tensor({2, 3}, rng2);
        text.at(0, 0) += 1.0;
        text.at(1, 1) += 1.0;
        auto pair = EmbeddingPair::make(image, text, {"a", "b"});
        SegmentationOutput out =
            decode(CorrelationVolume::make(vol, VolumeStage::aggregated), pair, image, image,
                   store, cfg);
        CHECK(out.out_h() == 4 * grid);
        CHECK(out.out_w() == 4 * grid);
        CHECK(out.logits.dim(2) == 2);
    }
}

TEST_CASE("zero-initialized head yields class zero everywhere") {
    PipelineConfig cfg = agg_cfg(4, 3, 2);
    cfg.d_enc = 3;
    ParamStore store;
    auto rng = make_rng(79);
    init_decoder(store, cfg, rng);
    store.get("dec.head.w") = Tensor({2, 1});
    store.get("dec.head.b") = Tensor({1});
    auto rng2 = make_rng(80);
    Tensor vol = random_tensor({4, 4, 3, 2}, rng2);
    Tensor image = random_tensor({4, 4, 3}, rng2);
    for (int i = 0; i < image.numel(); ++i) image[i] += 0.3;
    Tensor text = Tensor::full({3, 3}, 0.4);
    auto pair = EmbeddingPair::make(image, text, {"a", "b", "c"});
    SegmentationOutput out = decode(CorrelationVolume::make(vol, VolumeStage::aggregated), pair,
                                    image, image, store, cfg);
    for (int32_t m : out.mask) CHECK(m == 0);
}

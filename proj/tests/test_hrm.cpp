#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "core/rng.h"
#include "hrm/fuse.h"
#include "hrm/prototypes.h"
#include "hrm/window_attention.h"
#include "oracles/naive.h"
#include "sdm/partition.h"

using namespace salseg;

namespace {

ParamStore hrm_store(int d, uint64_t seed) {
    ParamStore store;
    auto rng = make_rng(seed);
    for (const char* bp : {"hrm.fg.", "hrm.bg."}) {
        init_pixel_refine(store, std::string(bp) + "pixel.", d, rng);
        init_prototypes(store, bp, d, rng);
        init_gate(store, bp, d, rng);
    }
    return store;
}

Tensor random_volume(std::vector<int> shape, std::mt19937_64& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (int i = 0; i < t.numel(); ++i) t[i] = uniform(rng, -scale, scale);
    return t;
}

void set_identity_mlp(ParamStore& store, const std::string& prefix, int d) {
    store.get(prefix + "w1") = Tensor::identity(d);
    store.get(prefix + "b1") = Tensor({d});
    store.get(prefix + "w2") = Tensor::identity(d);
    store.get(prefix + "b2") = Tensor({d});
}

TokenPartition full_fg_partition(int hw, int nc) {
    Tensor scores({hw, nc});
    return partition_from_scores(scores, hw);
}

std::vector<double> apply_mlp2_loop(const ParamStore& store, const std::string& prefix,
                                    const std::vector<double>& x) {
    const Tensor &w1 = store.get(prefix + "w1"), &b1 = store.get(prefix + "b1");
    const Tensor &w2 = store.get(prefix + "w2"), &b2 = store.get(prefix + "b2");
    const int in = w1.dim(0), mid = w1.dim(1), out = w2.dim(1);
    std::vector<double> h(static_cast<size_t>(mid), 0.0), y(static_cast<size_t>(out), 0.0);
    for (int j = 0; j < mid; ++j) {
        double acc = b1[j];
        for (int i = 0; i < in; ++i) acc += x[static_cast<size_t>(i)] * w1.at(i, j);
        h[static_cast<size_t>(j)] = std::max(0.0, acc);
    }
    for (int j = 0; j < out; ++j) {
        double acc = b2[j];
        for (int i = 0; i < mid; ++i) acc += h[static_cast<size_t>(i)] * w2.at(i, j);
        y[static_cast<size_t>(j)] = acc;
    }
    return y;
}

}  // namespace

TEST_CASE("single-token windows with identity projections are the identity") {
    const int d = 3;
    ParamStore store = hrm_store(d, 31);
    for (const char* blk : {"hrm.fg.pixel.block0.", "hrm.fg.pixel.block1."}) {
        store.get(std::string(blk) + "wv") = Tensor::identity(d);
        store.get(std::string(blk) + "wo") = Tensor::identity(d);
    }
    auto rng = make_rng(32);
    Tensor values = random_volume({2, 2, 2, d}, rng);
    CorrelationVolume vol = CorrelationVolume::make(values, VolumeStage::raw);
    TokenPartition part = full_fg_partition(4, 2);
    PipelineConfig cfg;
    cfg.grid_h = cfg.grid_w = 2;
    cfg.n_classes = 2;
    cfg.d_corr = d;
    cfg.window_size = 1;
    cfg.k_fg = 4;
    cfg.d_enc = 4;
    CorrelationVolume out = pixel_refine(vol, part, Branch::foreground, store, cfg);
    CHECK(out.stage == VolumeStage::pixel);
    for (int i = 0; i < values.numel(); ++i) {
        CHECK(out.values[i] == doctest::Approx(values[i]).epsilon(1e-12));
    }
}

TEST_CASE("pixel refinement matches the window-enumeration oracle") {
    const int d = 3, h = 4, w = 4;
    ParamStore store = hrm_store(d, 33);
    PipelineConfig cfg;
    cfg.grid_h = h;
    cfg.grid_w = w;
    cfg.n_classes = 2;
    cfg.d_corr = d;
    cfg.window_size = 2;
    cfg.k_fg = 5;
    cfg.d_enc = 4;
    auto rng = make_rng(34);
    for (int rep = 0; rep < 25; ++rep) {
        Tensor scores({h * w, 2});
        for (int i = 0; i < scores.numel(); ++i) scores[i] = uniform(rng, -1, 1);
        TokenPartition part = partition_from_scores(scores, 1 + static_cast<int>(rng() % (h * w)));
        Tensor raw = random_volume({h, w, 2, d}, rng);
        // zero out the background so the volume matches its branch
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j)
                for (int n = 0; n < 2; ++n)
                    if (!part.is_fg(i * w + j, n))
                        for (int c = 0; c < d; ++c) raw.at(i, j, n, c) = 0.0;
        CorrelationVolume vol = CorrelationVolume::make(raw, VolumeStage::raw);
        CorrelationVolume out = pixel_refine(vol, part, Branch::foreground, store, cfg);
        const auto pick = [&](const char* name, int blk) {
            return store.get("hrm.fg.pixel.block" + std::to_string(blk) + "." + name);
        };
        for (int n = 0; n < 2; ++n) {
            Tensor tokens({h * w, d});
            std::vector<uint8_t> visible(static_cast<size_t>(h * w), 0);
            for (int t = 0; t < h * w; ++t) {
                visible[static_cast<size_t>(t)] = part.is_fg(t, n) ? 1 : 0;
                for (int c = 0; c < d; ++c) tokens.at(t, c) = raw.at(t / w, t % w, n, c);
            }
            Tensor expect = oracle::naive_window_refine(
                tokens, h, w, visible, 2, pick("wq", 0), pick("wk", 0), pick("wv", 0), pick("wo", 0),
                pick("wq", 1), pick("wk", 1), pick("wv", 1), pick("wo", 1));
            for (int t = 0; t < h * w; ++t) {
                for (int c = 0; c < d; ++c) {
                    CHECK(std::fabs(out.values.at(t / w, t % w, n, c) - expect.at(t, c)) < 1e-5);
                }
            }
        }
    }
}

TEST_CASE("invisible positions pass through and never leak into visible outputs") {
    const int d = 2, h = 4, w = 4;
    ParamStore store = hrm_store(d, 35);
    PipelineConfig cfg;
    cfg.grid_h = h;
    cfg.grid_w = w;
    cfg.n_classes = 2;
    cfg.d_corr = d;
    cfg.window_size = 2;
    cfg.k_fg = 6;
    cfg.d_enc = 4;
    auto rng = make_rng(36);
    for (int rep = 0; rep < 50; ++rep) {
        Tensor scores({h * w, 2});
        for (int i = 0; i < scores.numel(); ++i) scores[i] = uniform(rng, -1, 1);
        TokenPartition part = partition_from_scores(scores, 6);
        Tensor raw = random_volume({h, w, 2, d}, rng);
        CorrelationVolume out1 =
            pixel_refine(CorrelationVolume::make(raw, VolumeStage::raw), part,
                         Branch::foreground, store, cfg);
        // pass-through at background positions
        for (int t = 0; t < h * w; ++t) {
            for (int n = 0; n < 2; ++n) {
                if (part.is_fg(t, n)) continue;
                for (int c = 0; c < d; ++c) {
                    CHECK(out1.values.at(t / w, t % w, n, c) == raw.at(t / w, t % w, n, c));
                }
            }
        }
        // perturb background inputs only
        Tensor poked = raw;
        for (int t = 0; t < h * w; ++t) {
            for (int n = 0; n < 2; ++n) {
                if (part.is_fg(t, n)) continue;
                for (int c = 0; c < d; ++c) poked.at(t / w, t % w, n, c) += uniform(rng, -3, 3);
            }
        }
        CorrelationVolume out2 =
            pixel_refine(CorrelationVolume::make(poked, VolumeStage::raw), part,
                         Branch::foreground, store, cfg);
        for (int t = 0; t < h * w; ++t) {
            for (int n = 0; n < 2; ++n) {
                if (!part.is_fg(t, n)) continue;
                for (int c = 0; c < d; ++c) {
                    CHECK(std::fabs(out2.values.at(t / w, t % w, n, c) -
                                    out1.values.at(t / w, t % w, n, c)) < 1e-7);
                }
            }
        }
    }
}

TEST_CASE("the shifted block joins token pairs no first-block window contains") {
    auto first = window_index_sets(4, 4, 2, 0);
    auto second = window_index_sets(4, 4, 2, 1);
    auto together = [](const std::vector<std::vector<int>>& sets, int a, int b) {
        for (const auto& s : sets) {
            bool ha = false, hb = false;
            for (int t : s) {
                ha |= t == a;
                hb |= t == b;
            }
            if (ha && hb) return true;
        }
        return false;
    };
    bool found = false;
    for (const auto& s : second) {
        for (size_t i = 0; i < s.size() && !found; ++i) {
            for (size_t j = i + 1; j < s.size() && !found; ++j) {
                if (!together(first, s[i], s[j])) found = true;
            }
        }
    }
    CHECK(found);
}

TEST_CASE("category prototype of a constant volume under identity MLPs is 2c") {
    const int d = 3;
    ParamStore store = hrm_store(d, 37);
    set_identity_mlp(store, "hrm.fg.cat.avg.", d);
    set_identity_mlp(store, "hrm.fg.cat.max.", d);
    const double c = 0.75;  // positive so relu passes
    Tensor values = Tensor::full({2, 2, 2, d}, c);
    CorrelationVolume vol = CorrelationVolume::make(values, VolumeStage::pixel);
    TokenPartition part = full_fg_partition(4, 2);
    Tensor p = category_prototype(vol, part, Branch::foreground, store);
    REQUIRE(p.shape() == std::vector<int>{1, 2, d});
    for (int i = 0; i < p.numel(); ++i) CHECK(p[i] == doctest::Approx(2.0 * c).epsilon(1e-12));
}

TEST_CASE("category prototype pools exactly like the loop oracle") {
    const int d = 2;
    ParamStore store = hrm_store(d, 38);
    set_identity_mlp(store, "hrm.fg.cat.avg.", d);
    set_identity_mlp(store, "hrm.fg.cat.max.", d);
    Tensor values({2, 2, 1, d});
    // hand 2x2x1x2 volume, positive entries
    const double data[8] = {0.3, 1.2, 0.7, 0.4, 2.0, 0.1, 0.9, 0.8};
    for (int i = 0; i < 8; ++i) values[i] = data[i];
    CorrelationVolume vol = CorrelationVolume::make(values, VolumeStage::pixel);
    TokenPartition part = full_fg_partition(4, 1);
    Tensor p = category_prototype(vol, part, Branch::foreground, store);
    Tensor rows({4, d});
    for (int t = 0; t < 4; ++t)
        for (int c = 0; c < d; ++c) rows.at(t, c) = values.at(t / 2, t % 2, 0, c);
    auto avg = oracle::naive_avg_pool(rows, {0, 1, 2, 3});
    auto mx = oracle::naive_max_pool(rows, {0, 1, 2, 3});
    for (int c = 0; c < d; ++c) {
        CHECK(p.at(0, 0, c) == doctest::Approx(avg[static_cast<size_t>(c)] +
                                               mx[static_cast<size_t>(c)]).epsilon(1e-12));
    }
}

TEST_CASE("category prototype is invariant to spatial permutation") {
    const int d = 3;
    ParamStore store = hrm_store(d, 39);
    auto rng = make_rng(40);
    Tensor values = random_volume({2, 2, 2, d}, rng);
    Tensor permuted({2, 2, 2, d});
    const int perm[4] = {3, 1, 0, 2};
    for (int t = 0; t < 4; ++t)
        for (int n = 0; n < 2; ++n)
            for (int c = 0; c < d; ++c)
                permuted.at(t / 2, t % 2, n, c) = values.at(perm[t] / 2, perm[t] % 2, n, c);
    TokenPartition part = full_fg_partition(4, 2);
    Tensor a = category_prototype(CorrelationVolume::make(values, VolumeStage::pixel), part,
                                  Branch::foreground, store);
    Tensor b = category_prototype(CorrelationVolume::make(permuted, VolumeStage::pixel), part,
                                  Branch::foreground, store);
    for (int i = 0; i < a.numel(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("category prototype demands at least one visible token per class") {
    const int d = 2;
    ParamStore store = hrm_store(d, 41);
    Tensor values({2, 2, 2, d});
    CorrelationVolume vol = CorrelationVolume::make(values, VolumeStage::pixel);
    TokenPartition part = full_fg_partition(4, 2);  // background side is empty
    CHECK_THROWS_AS(category_prototype(vol, part, Branch::background, store), EmptyBranchError);
}

TEST_CASE("semantic prototype of a single class under identity MLPs doubles it") {
    const int d = 3;
    ParamStore store = hrm_store(d, 42);
    set_identity_mlp(store, "hrm.fg.sem.avg.", d);
    set_identity_mlp(store, "hrm.fg.sem.max.", d);
    Tensor cat({1, 1, d});
    cat.at(0, 0, 0) = 0.2;
    cat.at(0, 0, 1) = 1.4;
    cat.at(0, 0, 2) = 0.01;
    Tensor sem = semantic_prototype(cat, Branch::foreground, store);
    for (int c = 0; c < d; ++c) {
        CHECK(sem.at(0, 0, c) == doctest::Approx(2.0 * cat.at(0, 0, c)).epsilon(1e-12));
    }
}

TEST_CASE("semantic prototype ignores class order and matches the reduction oracle") {
    const int d = 4;
    ParamStore store = hrm_store(d, 43);
    auto rng = make_rng(44);
    Tensor cat({1, 3, d});
    for (int i = 0; i < cat.numel(); ++i) cat[i] = uniform(rng, -1, 1);
    Tensor shuffled({1, 3, d});
    const int perm[3] = {2, 0, 1};
    for (int n = 0; n < 3; ++n)
        for (int c = 0; c < d; ++c) shuffled.at(0, n, c) = cat.at(0, perm[n], c);
    Tensor a = semantic_prototype(cat, Branch::foreground, store);
    Tensor b = semantic_prototype(shuffled, Branch::foreground, store);
    for (int i = 0; i < a.numel(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));

    // loop oracle: avg/max over the class axis, then the stored MLPs
    Tensor rows({3, d});
    for (int n = 0; n < 3; ++n)
        for (int c = 0; c < d; ++c) rows.at(n, c) = cat.at(0, n, c);
    auto avg = oracle::naive_avg_pool(rows, {0, 1, 2});
    auto mx = oracle::naive_max_pool(rows, {0, 1, 2});
    auto ya = apply_mlp2_loop(store, "hrm.fg.sem.avg.", avg);
    auto ym = apply_mlp2_loop(store, "hrm.fg.sem.max.", mx);
    for (int c = 0; c < d; ++c) {
        CHECK(a.at(0, 0, c) ==
              doctest::Approx(ya[static_cast<size_t>(c)] + ym[static_cast<size_t>(c)]).epsilon(1e-12));
    }
}

TEST_CASE("zero gate MLP output halves the volume") {
    const int d = 3;
    ParamStore store = hrm_store(d, 45);
    store.get("hrm.fg.gate.w1") = Tensor({2 * d, d});
    store.get("hrm.fg.gate.b1") = Tensor({d});
    store.get("hrm.fg.gate.w2") = Tensor({d, d});
    store.get("hrm.fg.gate.b2") = Tensor({d});
    auto rng = make_rng(46);
    Tensor values = random_volume({2, 2, 2, d}, rng);
    CorrelationVolume vol = CorrelationVolume::make(values, VolumeStage::pixel);
    PrototypeSet protos = PrototypeSet::make(random_volume({1, 2, d}, rng),
                                             random_volume({1, 1, d}, rng), Branch::foreground);
    CorrelationVolume out = fuse(vol, protos, store);
    CHECK(out.stage == VolumeStage::fused);
    for (int i = 0; i < values.numel(); ++i) {
        CHECK(out.values[i] == doctest::Approx(0.5 * values[i]).epsilon(1e-12));
    }
}

TEST_CASE("saturating gate biases drive the gate to one") {
    const int d = 2;
    ParamStore store = hrm_store(d, 47);
    store.get("hrm.fg.gate.w1") = Tensor({2 * d, d});
    store.get("hrm.fg.gate.b1") = Tensor({d});
    store.get("hrm.fg.gate.w2") = Tensor({d, d});
    store.get("hrm.fg.gate.b2") = Tensor::full({d}, 50.0);
    auto rng = make_rng(48);
    Tensor values = random_volume({2, 2, 1, d}, rng);
    CorrelationVolume vol = CorrelationVolume::make(values, VolumeStage::pixel);
    PrototypeSet protos = PrototypeSet::make(random_volume({1, 1, d}, rng),
                                             random_volume({1, 1, d}, rng), Branch::foreground);
    CorrelationVolume out = fuse(vol, protos, store);
    for (int i = 0; i < values.numel(); ++i) {
        CHECK(out.values[i] == doctest::Approx(values[i]).epsilon(1e-9));
    }
}

TEST_CASE("fusion matches a scalar loop oracle and keeps the gate in (0,1)") {
    const int d = 3;
    ParamStore store = hrm_store(d, 49);
    auto rng = make_rng(50);
    for (int rep = 0; rep < 20; ++rep) {
        Tensor values = random_volume({2, 2, 2, d}, rng, 2.0);
        CorrelationVolume vol = CorrelationVolume::make(values, VolumeStage::pixel);
        Tensor cat = random_volume({1, 2, d}, rng);
        Tensor sem = random_volume({1, 1, d}, rng);
        PrototypeSet protos = PrototypeSet::make(cat, sem, Branch::foreground);
        CorrelationVolume out = fuse(vol, protos, store);
        for (int n = 0; n < 2; ++n) {
            std::vector<double> concat(static_cast<size_t>(2 * d));
            for (int c = 0; c < d; ++c) {
                concat[static_cast<size_t>(c)] = cat.at(0, n, c);
                concat[static_cast<size_t>(d + c)] = sem.at(0, 0, c);
            }
            auto pre = apply_mlp2_loop(store, "hrm.fg.gate.", concat);
            for (int c = 0; c < d; ++c) {
                const double gate = 1.0 / (1.0 + std::exp(-pre[static_cast<size_t>(c)]));
                CHECK(gate > 0.0);
                CHECK(gate < 1.0);
                for (int t = 0; t < 4; ++t) {
                    const double expect = values.at(t / 2, t % 2, n, c) * gate;
                    CHECK(std::fabs(out.values.at(t / 2, t % 2, n, c) - expect) < 1e-6);
                    CHECK(std::fabs(out.values.at(t / 2, t % 2, n, c)) <=
                          std::fabs(values.at(t / 2, t % 2, n, c)));
                }
            }
        }
    }
}

TEST_CASE("gradients flow end to end through refinement and fusion") {
    const int d = 2, h = 2, w = 2;
    ParamStore store = hrm_store(d, 51);
    auto rng = make_rng(52);
    Tensor x0 = random_volume({h * w, d}, rng);
    std::vector<uint8_t> visible(4, 1);
    std::vector<std::vector<int>> vis = {{0, 1, 2, 3}};

    auto build = [&](Tape& t, Tape::Var leaf) {
        Binder bind(t, store, false);
        Tape::Var refined = refine_tokens_forward(bind, "hrm.fg.pixel.", leaf, h, w, visible, 2);
        Tape::Var cat = category_prototype_forward(bind, "hrm.fg.", {refined}, vis);
        Tape::Var sem = semantic_prototype_forward(bind, "hrm.fg.", cat);
        Tape::Var gate = fuse_gate_forward(bind, "hrm.fg.", t.gather_rows(cat, {0}), sem);
        Tape::Var fused = t.mul_rowvec(refined, gate);
        return t.sum(t.mul(fused, fused));
    };
    Tape tape;
    Tape::Var leaf = tape.leaf(x0);
    Tape::Var loss = build(tape, leaf);
    tape.backward(loss);
    const Tensor& g = tape.grad(leaf);

    auto f = [&](const std::vector<double>& v) {
        Tape t2;
        Tape::Var l2 = t2.leaf(Tensor::from({h * w, d}, v));
        return t2.val(build(t2, l2))[0];
    };
    auto fd = oracle::finite_difference(f, x0.vec(), 1e-5);
    double num = 0, den = 0;
    for (int i = 0; i < x0.numel(); ++i) {
        num += (g[i] - fd[static_cast<size_t>(i)]) * (g[i] - fd[static_cast<size_t>(i)]);
        den += fd[static_cast<size_t>(i)] * fd[static_cast<size_t>(i)];
    }
    CHECK(std::sqrt(num) <= 1e-3 * std::max(1e-12, std::sqrt(den)));
}

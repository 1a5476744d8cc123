#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "core/rng.h"
#include "oracles/naive.h"
#include "train/ablation.h"
#include "train/checkpoint.h"
#include "train/efficiency.h"
#include "train/evaluate.h"
#include "train/trainer.h"

using namespace salseg;

namespace {

FullConfig tiny_full(uint64_t seed = 1) {
    FullConfig full;
    full.pipeline.grid_h = full.pipeline.grid_w = 4;
    full.pipeline.n_classes = 2;
    full.pipeline.d_enc = 6;
    full.pipeline.d_corr = 4;
    full.pipeline.d_attn = 8;
    full.pipeline.n_attn_heads = 2;
    full.pipeline.n_attn_layers = 1;
    full.pipeline.k_fg = 4;
    full.pipeline.window_size = 2;
    full.pipeline.seed = static_cast<int64_t>(seed);
    full.dataset.n_scenes = 4;
    full.dataset.n_classes = 2;
    full.dataset.image_size = 32;
    full.dataset.noise_sigma = 0.02;
    full.dataset.seed = static_cast<int64_t>(seed);
    full.train.total_iters = 4;
    full.train.batch_size = 2;
    full.train.eval_every = 2;
    full.train.checkpoint_every = 100;
    validate_config(full.pipeline);
    validate_spec(full.dataset, full.pipeline);
    validate_train(full.train);
    return full;
}

}  // namespace

TEST_CASE("logged loss decomposition sums exactly") {
    FullConfig full = tiny_full();
    Model model(full.pipeline, Variant::full());
    model.init_params();
    SceneGenerator gen(full.dataset, full.pipeline);
    TrainResult tr = train(model, gen, full);
    REQUIRE(!tr.log.empty());
    for (const MetricRecord& r : tr.log) {
        const double expect = full.train.ce_weight * r.loss_ce + full.train.itm_weight * r.loss_aux;
        CHECK(std::fabs(r.loss_total - expect) < 1e-6);
    }
}

TEST_CASE("zero learning rate leaves every parameter untouched") {
    FullConfig full = tiny_full();
    full.train.lr_main = 0.0;
    full.train.total_iters = 3;
    Model model(full.pipeline, Variant::full());
    model.init_params();
    std::map<std::string, Tensor> before = model.params().all();
    SceneGenerator gen(full.dataset, full.pipeline);
    train(model, gen, full);
    for (const auto& [name, t] : model.params().all()) {
        const Tensor& orig = before.at(name);
        for (int i = 0; i < t.numel(); ++i) CHECK(t[i] == orig[i]);
    }
}

TEST_CASE("training on one seed is byte-reproducible") {
    FullConfig full = tiny_full(9);
    std::string log1, log2;
    {
        Model model(full.pipeline, Variant::full());
        model.init_params();
        SceneGenerator gen(full.dataset, full.pipeline);
        log1 = train(model, gen, full).log_text;
    }
    {
        Model model(full.pipeline, Variant::full());
        model.init_params();
        SceneGenerator gen(full.dataset, full.pipeline);
        log2 = train(model, gen, full).log_text;
    }
    CHECK(log1 == log2);
    CHECK(log1.find("iteration,loss_total,loss_ce,loss_itm,miou\n") == 0);
}

TEST_CASE("mIoU basics and the set-arithmetic oracle") {
    IouAccumulator acc(3);
    std::vector<int32_t> gt = {0, 0, 1, 1, 2, 2};
    acc.add(gt, gt);
    CHECK(acc.mean() == doctest::Approx(1.0));

    IouAccumulator shifted(2);
    std::vector<int32_t> a = {0, 0, 1, 1};
    std::vector<int32_t> b = {1, 1, 0, 0};
    shifted.add(a, b);
    CHECK(shifted.mean() == doctest::Approx(0.0));

    // hand 4x4 mask pair, compared against the independent oracle
    std::vector<int32_t> pred = {0, 0, 1, 1, 0, 1, 1, 2, 2, 2, 1, 0, 0, 1, 2, 2};
    std::vector<int32_t> truth = {0, 1, 1, 1, 0, 1, 2, 2, 2, 2, 1, 1, 0, 1, 2, 0};
    IouAccumulator hand(3);
    hand.add(pred, truth);
    auto expect = oracle::naive_iou(pred, truth, 3);
    CHECK(hand.mean() == doctest::Approx(expect.mean).epsilon(1e-12));
    auto per = hand.per_class();
    for (int c = 0; c < 3; ++c) {
        CHECK(per[static_cast<size_t>(c)] ==
              doctest::Approx(expect.per_class[static_cast<size_t>(c)]).epsilon(1e-12));
    }
}

TEST_CASE("checkpoints round-trip bit-identically and preserve evaluation") {
    FullConfig full = tiny_full(4);
    full.train.total_iters = 3;
    Model model(full.pipeline, Variant::full());
    model.init_params();
    SceneGenerator gen(full.dataset, full.pipeline);
    TrainResult tr = train(model, gen, full);

    const auto dir = std::filesystem::temp_directory_path() / "salseg_ckpt_rt";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "checkpoint.nar").string();
    save_checkpoint(tr.checkpoint, path);
    Checkpoint back = load_checkpoint(path);
    CHECK(back.iteration == tr.checkpoint.iteration);
    for (const auto& [name, t] : tr.checkpoint.tensors) {
        const Tensor& bt = back.tensors.at(name);
        REQUIRE(bt.same_shape(t));
        for (int i = 0; i < t.numel(); ++i) CHECK(bt[i] == t[i]);
    }
    RestoredModel restored = restore_model(back);
    EvalResult e1 = evaluate(model, gen);
    EvalResult e2 = evaluate(restored.model, gen);
    CHECK(e1.miou == e2.miou);  // bit-identical, not approximate
    std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoint restore validates tensor inventory") {
    FullConfig full = tiny_full(5);
    Model model(full.pipeline, Variant::full());
    model.init_params();
    auto rng = make_rng(1);
    Checkpoint ckpt = Checkpoint::capture(model, full, 0, rng);
    ckpt.tensors.erase(ckpt.tensors.begin());
    CHECK_THROWS_AS(restore_model(ckpt), ValidationError);
}

TEST_CASE("warmup-cosine schedule ramps then decays to zero") {
    TrainConfig tc;
    tc.total_iters = 100;
    tc.warmup_frac = 0.1;
    tc.lr_main = 1.0;
    CHECK(lr_at(tc, 0) == doctest::Approx(0.1));
    CHECK(lr_at(tc, 9) == doctest::Approx(1.0));
    CHECK(lr_at(tc, 10) == doctest::Approx(1.0));
    CHECK(lr_at(tc, 99) < 0.01);
    for (int i = 11; i < 99; ++i) CHECK(lr_at(tc, i) <= lr_at(tc, i - 1));
}

TEST_CASE("variant wiring shows up in the call trace") {
    FullConfig full = tiny_full(6);
    SceneGenerator gen(full.dataset, full.pipeline);
    GeneratedScene scene = gen.generate(0);
    auto [g1, g2] = gen.guidance(scene);

    Variant no_refine;  // saliency selection, refinement fully off
    no_refine.pixel_on = no_refine.category_on = no_refine.semantic_on = false;
    Model m1(full.pipeline, no_refine);
    m1.init_params();
    ForwardResult r1 = m1.infer(ForwardInputs{scene.pair, g1, g2}, /*want_trace=*/true);
    for (const std::string& op : r1.trace) {
        CHECK(op != "pixel_refine");
        CHECK(op != "category_prototype");
        CHECK(op != "semantic_prototype");
        CHECK(op != "fuse");
    }

    Model m2(full.pipeline, Variant::full());
    m2.init_params();
    ForwardResult r2 = m2.infer(ForwardInputs{scene.pair, g1, g2}, /*want_trace=*/true);
    auto has = [&](const char* name) {
        for (const std::string& op : r2.trace) {
            if (op == name) return true;
        }
        return false;
    };
    CHECK(has("cross_attend"));
    CHECK(has("saliency"));
    CHECK(has("select_tokens"));
    CHECK(has("pixel_refine"));
    CHECK(has("category_prototype"));
    CHECK(has("semantic_prototype"));
    CHECK(has("fuse"));
    CHECK(has("aggregate"));
    CHECK(has("decode"));
}

TEST_CASE("inference completes without labels and the stub provider is live") {
    FullConfig full = tiny_full(7);
    Model model(full.pipeline, Variant::full());
    model.init_params();
    SceneGenerator gen(full.dataset, full.pipeline);
    GeneratedScene scene = gen.generate(1);
    auto [g1, g2] = gen.guidance(scene);
    ForwardResult out = model.infer(ForwardInputs{scene.pair, g1, g2});
    CHECK(out.has_saliency);
    CHECK(out.has_partition);
    CHECK(out.ce_loss == -1);
    CHECK(out.aux_loss == -1);

    ThrowingLabelProvider guard;
    CHECK_THROWS_AS((void)guard.grid_labels(), LabelError);
    // handing the guard to a training forward must trip it
    Tape tape;
    Binder bind(tape, model.params(), false);
    auto itm_rng = make_rng(1);
    CHECK_THROWS_AS(
        model.forward(bind, ForwardInputs{scene.pair, g1, g2}, &guard, &itm_rng),
        LabelError);
}

TEST_CASE("k sweep values are ratio-matched to the token count") {
    PipelineConfig cfg;
    cfg.grid_h = cfg.grid_w = 12;
    CHECK(k_sweep_values(cfg) == std::vector<int>{4, 12, 24});
    cfg.grid_h = cfg.grid_w = 24;
    CHECK(k_sweep_values(cfg) == std::vector<int>{17, 46, 98});
}

TEST_CASE("ablation tables are deterministic and structured") {
    FullConfig full = tiny_full(8);
    full.train.total_iters = 2;
    full.train.eval_every = 2;
    AblationResult a = run_ablation(AblationSuite::k_sweep, full, std::nullopt);
    AblationResult b = run_ablation(AblationSuite::k_sweep, full, std::nullopt);
    CHECK(a.csv == b.csv);
    REQUIRE(a.rows.size() == 3);
    // 3 data rows + header
    int lines = 0;
    for (char c : a.csv) lines += c == '\n' ? 1 : 0;
    CHECK(lines == 4);
}

TEST_CASE("disentanglement suite needs a covering taxonomy") {
    FullConfig full = tiny_full(10);
    full.train.total_iters = 1;
    CHECK_THROWS_AS(run_ablation(AblationSuite::disentanglement, full, std::nullopt),
                    TaxonomyError);
    std::map<std::string, Branch> partial = {{"class0", Branch::foreground}};
    CHECK_THROWS_AS(run_ablation(AblationSuite::disentanglement, full, partial), TaxonomyError);
}

TEST_CASE("every disentanglement variant trains and evaluates") {
    FullConfig full = tiny_full(11);
    full.train.total_iters = 2;
    full.train.eval_every = 2;
    std::map<std::string, Branch> taxonomy = {{"class0", Branch::foreground},
                                              {"class1", Branch::background}};
    AblationResult res = run_ablation(AblationSuite::disentanglement, full, taxonomy);
    REQUIRE(res.rows.size() == 8);
    for (const AblationRow& row : res.rows) {
        CHECK(std::isfinite(row.miou));
        CHECK(row.miou >= 0.0);
        CHECK(row.miou <= 1.0);
    }
    AblationResult agg = run_ablation(AblationSuite::aggregation, full, std::nullopt);
    REQUIRE(agg.rows.size() == 3);
}

TEST_CASE("analytic parameter count matches the checkpoint walk") {
    for (uint64_t seed : {1ULL, 2ULL}) {
        FullConfig full = tiny_full(seed);
        Model model(full.pipeline, Variant::full());
        model.init_params();
        auto formula = parameter_formula(full.pipeline);
        long long total = 0;
        for (const auto& [k, v] : formula) {
            (void)k;
            total += v;
        }
        CHECK(total == model.params().total_count());
    }
}

TEST_CASE("gate MLP MAC term quadruples when D doubles") {
    PipelineConfig cfg;
    auto base = mac_formula(cfg);
    PipelineConfig big = cfg;
    big.d_corr = 2 * cfg.d_corr;
    auto doubled = mac_formula(big);
    // the gate-MLP share of hrm: isolate via the formula's structure
    const long long d = cfg.d_corr, nc = cfg.n_classes;
    const long long gate_term = 2 * nc * (2 * d * d + d * d);
    const long long gate_term_big = 2 * nc * (2 * 4 * d * d + 4 * d * d);
    CHECK(gate_term_big == 4 * gate_term);
    CHECK(doubled["hrm"] > base["hrm"]);
}

TEST_CASE("efficiency report walks, times and separates the saliency path") {
    FullConfig full = tiny_full(12);
    Model model(full.pipeline, Variant::full());
    model.init_params();
    SceneGenerator gen(full.dataset, full.pipeline);
    EfficiencyReport rep = efficiency_report(model, gen, 5);
    CHECK(rep.params_total == rep.params_walked);
    CHECK(rep.median_forward_s > 0.0);
    CHECK(rep.median_saliency_path_s > 0.0);
    CHECK(rep.saliency_fraction > 0.0);
    CHECK(rep.macs_total > 0);
    const std::string csv = efficiency_csv(rep);
    CHECK(csv.find("component,params,macs\n") == 0);
    CHECK(csv.find("total,") != std::string::npos);
}

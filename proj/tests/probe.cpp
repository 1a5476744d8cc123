// scratch experiment runner (not registered with ctest)
#include <cstdio>
#include <cstdlib>
#include <string>

#include "model.h"
#include "train/evaluate.h"
#include "train/trainer.h"

using namespace salseg;

int main(int argc, char** argv) {
    int iters = argc > 1 ? std::atoi(argv[1]) : 400;
    double lr = argc > 2 ? std::atof(argv[2]) : 2e-4;
    std::string mode = argc > 3 ? argv[3] : "c7";
    int64_t seed = argc > 4 ? std::atoll(argv[4]) : 11;

    FullConfig full;
    if (mode == "c7") {
        full.train.total_iters = iters;
        full.train.lr_main = lr;
        full.train.eval_every = 50;
        full.train.checkpoint_every = 100000;
    } else {
        full.pipeline.grid_h = full.pipeline.grid_w = 8;
        full.pipeline.n_classes = 3;
        full.pipeline.d_enc = 16;
        full.pipeline.d_corr = 16;
        full.pipeline.d_attn = 32;
        full.pipeline.n_attn_heads = 4;
        full.pipeline.n_attn_layers = 2;
        full.pipeline.k_fg = 11;
        full.pipeline.window_size = 4;
        full.pipeline.seed = seed;
        full.dataset.n_scenes = 8;
        full.dataset.n_classes = 3;
        full.dataset.image_size = 64;
        full.dataset.fg_confusability = 0.7;
        full.dataset.noise_sigma = 0.3;
        full.dataset.seed = seed;
        full.train.total_iters = iters;
        full.train.lr_main = lr;
        full.train.eval_every = 100;
        full.train.checkpoint_every = 100000;
    }
    validate_config(full.pipeline);
    validate_spec(full.dataset, full.pipeline);

    Variant v = Variant::full();
    if (mode == "no_dis") v.disentangle = Variant::Disentangle::none;
    if (mode == "no_hrm") v.pixel_on = v.category_on = v.semantic_on = false;
    if (mode == "pixel_only") v.category_on = v.semantic_on = false;
    if (mode == "cat_only") v.pixel_on = v.semantic_on = false;
    if (mode == "no_sem") v.semantic_on = false;

    Model model(full.pipeline, v);
    model.init_params();
    SceneGenerator gen(full.dataset, full.pipeline);
    TrainResult tr = train(model, gen, full);
    for (const auto& r : tr.log) {
        if (r.has_miou) std::printf("%d loss %.4f miou %.4f\n", r.iteration, r.loss_total, r.miou);
    }
    std::printf("final %.4f\n", tr.final_miou);
    return 0;
}

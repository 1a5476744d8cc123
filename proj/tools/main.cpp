// Command-line front end; links only the C API.

#include <cstdio>
#include <cstdlib>
#include <string>

#include <CLI11.hpp>

#include "salseg.h"

namespace {

int status_to_exit(salseg_status st) {
    switch (st) {
        case SALSEG_OK: return 0;
        case SALSEG_CONFIG_ERROR: return 2;
        case SALSEG_RUNTIME_ERROR:
        case SALSEG_IO_ERROR: return 3;
    }
    return 3;
}

std::string default_out(const std::string& sub) {
    const char* root = std::getenv("SALSEG_OUT_ROOT");
    return std::string(root ? root : "salseg_out") + "/" + sub;
}

struct Session {
    salseg_session* s = nullptr;
    ~Session() { salseg_close(s); }
};

int finish(Session& sess, salseg_status st) {
    if (st == SALSEG_OK) {
        std::printf("%s\n", salseg_last_summary(sess.s));
        return 0;
    }
    std::fprintf(stderr, "error: %s\n", salseg_last_error(sess.s));
    return status_to_exit(st);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"saliency-driven foreground/background segmentation pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    long long seed_override = -1;
    app.add_option("-c,--config", config_path, "flat key=value config file")->required();
    app.add_option("--seed", seed_override, "override the config seed");

    std::string out_gen = default_out("data");
    auto* gen = app.add_subcommand("gen-data", "write the synthetic dataset to disk");
    gen->add_option("-o,--out", out_gen, "output directory");

    std::string out_train = default_out("train");
    bool force = false;
    auto* tr = app.add_subcommand("train", "train the pipeline and write a checkpoint");
    tr->add_option("-o,--out", out_train, "output directory");
    tr->add_flag("-f,--force", force, "overwrite an existing checkpoint");

    std::string out_eval = default_out("eval");
    std::string ckpt_eval;
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint (per-class IoU, mIoU)");
    ev->add_option("-o,--out", out_eval, "output directory");
    ev->add_option("-k,--checkpoint", ckpt_eval, "checkpoint file")->required();

    std::string out_abl = default_out("ablate");
    std::string suite, taxonomy;
    auto* ab = app.add_subcommand("ablate", "run an ablation suite");
    ab->add_option("-s,--suite", suite, "disentanglement | k_sweep | aggregation")->required();
    ab->add_option("-t,--taxonomy", taxonomy, "class = fg|bg file (disentanglement suite)");
    ab->add_option("-o,--out", out_abl, "output directory");

    std::string out_eff = default_out("efficiency");
    auto* ef = app.add_subcommand("report-efficiency",
                                  "parameter count, MAC estimate and forward timings");
    ef->add_option("-o,--out", out_eff, "output directory");

    std::string out_vis = default_out("visualize");
    std::string ckpt_vis, class_name, kind = "prediction";
    int scene_index = 0;
    auto* vis = app.add_subcommand("visualize", "emit saliency / partition / prediction images");
    vis->add_option("-k,--checkpoint", ckpt_vis, "checkpoint file")->required();
    vis->add_option("--scene", scene_index, "scene index");
    vis->add_option("--class", class_name, "class name (e.g. class0)");
    vis->add_option("--kind", kind, "saliency | correlation | partition | prediction");
    vis->add_option("-o,--out", out_vis, "output directory");

    CLI11_PARSE(app, argc, argv);

    Session sess;
    char errbuf[512] = {0};
    salseg_status st = salseg_open(config_path.c_str(), seed_override, &sess.s, errbuf,
                                   sizeof(errbuf));
    if (st != SALSEG_OK) {
        std::fprintf(stderr, "error: %s\n", errbuf);
        return status_to_exit(st);
    }

    if (gen->parsed()) return finish(sess, salseg_gen_data(sess.s, out_gen.c_str()));
    if (tr->parsed()) return finish(sess, salseg_train(sess.s, out_train.c_str(), force ? 1 : 0));
    if (ev->parsed()) {
        return finish(sess, salseg_eval(sess.s, ckpt_eval.c_str(), out_eval.c_str(), nullptr));
    }
    if (ab->parsed()) {
        return finish(sess, salseg_ablate(sess.s, suite.c_str(),
                                          taxonomy.empty() ? nullptr : taxonomy.c_str(),
                                          out_abl.c_str()));
    }
    if (ef->parsed()) return finish(sess, salseg_report_efficiency(sess.s, out_eff.c_str()));
    if (vis->parsed()) {
        return finish(sess, salseg_visualize(sess.s, ckpt_vis.c_str(), scene_index,
                                             class_name.empty() ? nullptr : class_name.c_str(),
                                             kind.c_str(), out_vis.c_str()));
    }
    return 2;
}

#include "commands.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "core/errors.h"
#include "core/image_io.h"
#include "encoders/synthetic.h"
#include "model.h"
#include "sdm/correlation.h"
#include "train/ablation.h"
#include "train/checkpoint.h"
#include "train/efficiency.h"
#include "train/evaluate.h"
#include "train/trainer.h"

namespace salseg {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << text;
}

std::string hex64(uint64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

int class_index_by_name(const std::vector<std::string>& names, const std::string& name) {
    for (size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return static_cast<int>(i);
    }
    std::string known;
    for (const auto& n : names) known += (known.empty() ? "" : ", ") + n;
    throw ValidationError("unknown class `" + name + "` (known: " + known + ")");
}

}  // namespace

FullConfig apply_seed_override(FullConfig full, const std::optional<int64_t>& seed) {
    if (seed) {
        full.pipeline.seed = *seed;
        full.dataset.seed = *seed;
    }
    return full;
}

std::string cmd_gen_data(const CommandOptions& opt, const std::string& out_dir) {
    const FullConfig full = apply_seed_override(opt.full, opt.seed_override);
    ensure_dir(out_dir);
    ensure_dir(out_dir + "/scenes");
    SceneGenerator gen(full.dataset, full.pipeline);
    for (int i = 0; i < full.dataset.n_scenes; ++i) {
        char name[48];
        std::snprintf(name, sizeof(name), "scene_%05d.nar", i);
        scene_to_arrays(gen.generate(i)).save(out_dir + "/scenes/" + name);
    }
    write_text(out_dir + "/dataset.cfg", full.serialize());
    const std::string hash = hex64(gen.dataset_hash());
    write_text(out_dir + "/hash.txt", hash + "\n");
    return "gen-data: wrote " + std::to_string(full.dataset.n_scenes) + " scenes to " + out_dir +
           "/scenes (hash " + hash + ")";
}

std::string cmd_train(const CommandOptions& opt, const std::string& out_dir) {
    const FullConfig full = apply_seed_override(opt.full, opt.seed_override);
    ensure_dir(out_dir);
    const std::string ckpt_path = out_dir + "/checkpoint.nar";
    if (fs::exists(ckpt_path) && !opt.force) {
        throw ConfigError("checkpoint already exists at " + ckpt_path +
                          " (pass the force flag to overwrite)");
    }
    Model model(full.pipeline, Variant::full());
    model.init_params();
    SceneGenerator gen(full.dataset, full.pipeline);
    TrainResult tr = train(model, gen, full, out_dir);
    write_text(out_dir + "/metrics.csv", tr.log_text);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "train: %d iterations, final train mIoU %.4f", full.train.total_iters,
                  tr.final_miou);
    return std::string(buf) + ", checkpoint at " + ckpt_path;
}

std::string cmd_eval(const CommandOptions& opt, const std::string& checkpoint_path,
                     const std::string& out_dir, double* miou_out) {
    const FullConfig full = apply_seed_override(opt.full, opt.seed_override);
    ensure_dir(out_dir);
    RestoredModel restored = restore_model(load_checkpoint(checkpoint_path));
    SceneGenerator gen(full.dataset, restored.full.pipeline);
    EvalResult ev = evaluate(restored.model, gen);
    std::string csv = "class,iou\n";
    for (size_t c = 0; c < ev.per_class_iou.size(); ++c) {
        char row[64];
        if (std::isnan(ev.per_class_iou[c])) {
            std::snprintf(row, sizeof(row), "class%zu,\n", c);
        } else {
            std::snprintf(row, sizeof(row), "class%zu,%.6f\n", c, ev.per_class_iou[c]);
        }
        csv += row;
    }
    char mean_row[64];
    std::snprintf(mean_row, sizeof(mean_row), "mean,%.6f\n", ev.miou);
    csv += mean_row;
    write_text(out_dir + "/eval.csv", csv);
    if (miou_out) *miou_out = ev.miou;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "eval: mIoU %.6f over %d scenes", ev.miou, ev.scenes);
    return buf;
}

std::string cmd_ablate(const CommandOptions& opt, const std::string& suite,
                       const std::string& taxonomy_path, const std::string& out_dir) {
    const FullConfig full = apply_seed_override(opt.full, opt.seed_override);
    ensure_dir(out_dir);
    const AblationSuite s = parse_suite(suite);
    std::optional<std::map<std::string, Branch>> taxonomy;
    if (!taxonomy_path.empty()) taxonomy = load_taxonomy(taxonomy_path);
    AblationResult res = run_ablation(s, full, taxonomy);
    write_text(out_dir + "/" + suite + ".csv", res.csv);
    std::string summary = "ablate " + suite + ":";
    for (const AblationRow& row : res.rows) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "\n  %-20s mIoU %.4f", row.name.c_str(), row.miou);
        summary += buf;
    }
    return summary;
}

std::string cmd_report_efficiency(const CommandOptions& opt, const std::string& out_dir) {
    const FullConfig full = apply_seed_override(opt.full, opt.seed_override);
    ensure_dir(out_dir);
    Model model(full.pipeline, Variant::full());
    model.init_params();
    SceneGenerator gen(full.dataset, full.pipeline);
    EfficiencyReport rep = efficiency_report(model, gen);
    write_text(out_dir + "/efficiency.csv", efficiency_csv(rep));
    write_text(out_dir + "/efficiency.txt", efficiency_text(rep));
    return "report-efficiency:\n" + efficiency_text(rep);
}

std::string cmd_visualize(const CommandOptions& opt, const std::string& checkpoint_path,
                          int scene_index, const std::string& class_name, const std::string& kind,
                          const std::string& out_dir) {
    const FullConfig full = apply_seed_override(opt.full, opt.seed_override);
    ensure_dir(out_dir);
    RestoredModel restored = restore_model(load_checkpoint(checkpoint_path));
    const PipelineConfig& cfg = restored.full.pipeline;
    SceneGenerator gen(full.dataset, cfg);
    GeneratedScene scene = gen.generate(scene_index);
    auto [g1, g2] = gen.guidance(scene);
    ForwardResult out = restored.model.infer(ForwardInputs{scene.pair, g1, g2});
    const int h = cfg.grid_h, w = cfg.grid_w;

    if (kind == "saliency") {
        if (!out.has_saliency) {
            throw ValidationError("this checkpoint's variant computes no saliency maps");
        }
        const int cls = class_index_by_name(scene.pair.class_names, class_name);
        Tensor map({h, w});
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) map.at(i, j) = out.saliency.maps.at(i, j, cls);
        }
        const std::string path = out_dir + "/saliency_" + class_name + ".pgm";
        write_pgm(path, to_grayscale(map), h, w);
        return "visualize: wrote " + path;
    }
    if (kind == "correlation") {
        const int cls = class_index_by_name(scene.pair.class_names, class_name);
        Tensor cosine = cosine_similarity(scene.pair);
        Tensor map({h, w});
        for (int t = 0; t < h * w; ++t) map[t] = cosine.at(t, cls);
        const std::string path = out_dir + "/correlation_" + class_name + ".pgm";
        write_pgm(path, to_grayscale(map), h, w);
        return "visualize: wrote " + path;
    }
    if (kind == "partition") {
        if (!out.has_partition) {
            throw ValidationError("this checkpoint's variant computes no token partition");
        }
        const int cls = class_index_by_name(scene.pair.class_names, class_name);
        std::vector<uint8_t> mask(static_cast<size_t>(h) * w, 0);
        for (int t = 0; t < h * w; ++t) {
            if (out.partition.is_fg(t, cls)) mask[static_cast<size_t>(t)] = 255;
        }
        const std::string path = out_dir + "/partition_" + class_name + ".pgm";
        write_pgm(path, mask, h, w);
        // overlay: scene layout colors, foreground cells brightened
        std::vector<int32_t> grid_labels(scene.gt_grid.begin(), scene.gt_grid.end());
        std::vector<uint8_t> rgb = colorize_labels(grid_labels, cfg.n_classes);
        for (int t = 0; t < h * w; ++t) {
            const double f = out.partition.is_fg(t, cls) ? 1.0 : 0.35;
            for (int c = 0; c < 3; ++c) {
                rgb[static_cast<size_t>(t) * 3 + c] =
                    static_cast<uint8_t>(rgb[static_cast<size_t>(t) * 3 + c] * f);
            }
        }
        const std::string overlay = out_dir + "/partition_" + class_name + "_overlay.ppm";
        write_ppm(overlay, rgb, h, w);
        return "visualize: wrote " + path + " and " + overlay;
    }
    if (kind == "prediction") {
        const std::string pgm = out_dir + "/prediction.pgm";
        std::vector<uint8_t> ids(out.output.mask.size());
        for (size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<uint8_t>(out.output.mask[i]);
        write_pgm(pgm, ids, out.output.out_h(), out.output.out_w());
        const std::string ppm = out_dir + "/prediction.ppm";
        write_ppm(ppm, colorize_labels(out.output.mask, cfg.n_classes), out.output.out_h(),
                  out.output.out_w());
        const double acc = pixel_accuracy(out.output.mask, scene.gt_out);
        char buf[160];
        std::snprintf(buf, sizeof(buf), "visualize: wrote %s and %s; pixel accuracy %.4f",
                      pgm.c_str(), ppm.c_str(), acc);
        return buf;
    }
    throw ConfigError("unknown visualize kind `" + kind +
                      "` (expected saliency, correlation, partition or prediction)");
}

}  // namespace salseg

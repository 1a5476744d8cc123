#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "core/keyvalue.h"

namespace salseg {

enum class SaliencyGradMode { per_class, batch };
enum class GateMode { per_channel, scalar };

// Objective behind the training-time saliency gradient. `score` differentiates
// the regressed matched probability (the same objective inference uses, and
// the class-score convention of gradient attribution); `loss` differentiates
// the matching loss itself. For a matched pair the two gradients are
// anti-parallel, so `loss` partitions tokens opposite to the inference path.
enum class SaliencyTrainObjective { score, loss };

// Shapes and widths shared by the whole pipeline. Defaults are the desk-scale
// configuration; every field is a key of the flat config format.
struct PipelineConfig {
    int grid_h = 12;
    int grid_w = 12;
    int n_classes = 3;
    int d_corr = 32;   // correlation channel count D
    int d_enc = 32;    // encoder embedding width
    int d_attn = 64;   // saliency-attention width
    int n_attn_heads = 8;
    int n_attn_layers = 3;
    int k_fg = 24;     // foreground token count per class (17% of 12x12)
    int window_size = 4;
    double itm_weight = 0.2;
    int64_t seed = 1;
    SaliencyGradMode saliency_grad_mode = SaliencyGradMode::per_class;
    SaliencyTrainObjective saliency_train_objective = SaliencyTrainObjective::score;
    GateMode gate_mode = GateMode::per_channel;

    int tokens() const { return grid_h * grid_w; }
    int out_h() const { return 4 * grid_h; }
    int out_w() const { return 4 * grid_w; }

    static PipelineConfig read(KeyValueFile& kv);
    std::map<std::string, std::string> entries() const;
};

// Returns cfg unchanged when all invariants hold; throws ConfigError naming
// the violated constraint otherwise.
PipelineConfig validate_config(const PipelineConfig& cfg);

struct DatasetSpec {
    int n_scenes = 16;
    int n_classes = 3;
    int image_size = 96;          // square; multiple of 4 * grid
    double fg_confusability = 0.0;
    double noise_sigma = 0.05;
    int64_t seed = 1;

    static DatasetSpec read(KeyValueFile& kv);
    std::map<std::string, std::string> entries() const;
};

DatasetSpec validate_spec(const DatasetSpec& spec, const PipelineConfig& cfg);

struct TrainConfig {
    int total_iters = 600;
    int batch_size = 2;
    double lr_main = 2e-4;
    double lr_encoder = 2e-6;  // unused while encoders are synthetic/frozen
    double weight_decay = 1e-4;
    double warmup_frac = 0.1;
    double ce_weight = 1.0;
    double itm_weight = 0.2;
    int checkpoint_every = 200;
    int eval_every = 50;

    static TrainConfig read(KeyValueFile& kv);
    std::map<std::string, std::string> entries() const;
};

TrainConfig validate_train(const TrainConfig& cfg);

// All three configs read from one flat file; shared keys (n_classes, seed,
// itm_weight) feed every struct that lists them. Unknown keys are an error.
struct FullConfig {
    PipelineConfig pipeline;
    DatasetSpec dataset;
    TrainConfig train;

    static FullConfig load_file(const std::string& path);
    static FullConfig load_text(const std::string& text, const std::string& origin = "<text>");
    std::string serialize() const;
};

}  // namespace salseg

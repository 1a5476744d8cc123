#pragma once

#include <string>
#include <vector>

#include "encoders/synthetic.h"
#include "model.h"
#include "train/checkpoint.h"

namespace salseg {

struct MetricRecord {
    int iteration = 0;
    double loss_total = 0, loss_ce = 0, loss_aux = 0;
    bool has_miou = false;
    double miou = 0;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<MetricRecord> log;
    std::string log_text;  // line-delimited, byte-stable given a seed
    double final_miou = 0;
};

// Warmup-cosine learning rate: linear ramp over warmup_frac of the run, then
// a cosine decay to zero.
double lr_at(const TrainConfig& cfg, int iteration);

// Runs the loop on `model` in place. Scenes come round-robin from the
// generator; the auxiliary loss weight is cfg.itm_weight. When
// checkpoint_dir is non-empty, periodic and final checkpoints are written
// there. Throws DivergenceError (after an emergency checkpoint) if the loss
// goes non-finite.
TrainResult train(Model& model, const SceneGenerator& gen, const FullConfig& full,
                  const std::string& checkpoint_dir = "");

std::string metrics_to_text(const std::vector<MetricRecord>& log);

}  // namespace salseg

#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "model.h"

namespace salseg {

// On-disk model state: every learned tensor under its dotted path, plus the
// config snapshot, variant, iteration counter and RNG state. Save -> load is
// bit-identical for all tensors (raw doubles in the container payload).
struct Checkpoint {
    int64_t iteration = 0;
    std::map<std::string, Tensor> tensors;
    std::string config_text;   // flat key=value snapshot
    std::string variant_text;  // Variant::describe() form
    std::string rng_state;     // serialized mt19937_64

    static Checkpoint capture(const Model& model, const FullConfig& full, int64_t iteration,
                              const std::mt19937_64& rng);
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

Variant parse_variant(const std::string& text);

// Rebuilds the model (and the config it was trained under) from a checkpoint.
struct RestoredModel {
    FullConfig full;
    Model model;
};
RestoredModel restore_model(const Checkpoint& ckpt);

}  // namespace salseg

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/config.h"
#include "core/container.h"
#include "core/types.h"

namespace salseg {

// Ground truth and planted directions behind one synthetic scene.
struct SyntheticScene {
    std::vector<int32_t> layout;  // [image_h * image_w] class ids
    int image_h = 0;
    int image_w = 0;
    Tensor class_vectors;  // [N_C, D_enc], unit rows
    double fg_confusability = 0.0;
    double noise_sigma = 0.0;
};

struct GeneratedScene {
    SyntheticScene scene;
    EmbeddingPair pair;
    std::vector<int32_t> gt_grid;  // [H * W]
    std::vector<int32_t> gt_out;   // [4H * 4W]
};

// Majority vote over non-overlapping (h_in/h_out x w_in/w_out) blocks; ties
// take the lowest class id.
std::vector<int32_t> majority_pool(const std::vector<int32_t>& labels, int h_in, int w_in,
                                   int h_out, int w_out);

// Deterministic scene source: generate(index) is pure in (spec, cfg, index),
// so callers may generate scenes in parallel.
class SceneGenerator {
public:
    SceneGenerator(DatasetSpec spec, PipelineConfig cfg);

    GeneratedScene generate(int index) const;  // IndexError past n_scenes

    // Class directions with exact pairwise cosine fg_confusability: each is
    // sqrt(1-rho) * e_i + sqrt(rho) * u for an orthonormal {e_i, u}.
    const Tensor& class_vectors() const { return class_vectors_; }
    const std::vector<std::string>& class_names() const { return class_names_; }
    const std::vector<std::string>& prompts() const { return prompts_; }
    const DatasetSpec& spec() const { return spec_; }
    const PipelineConfig& config() const { return cfg_; }

    // Two intermediate "encoder depth" feature maps: noisy copies of the
    // patch embedding, standing in for mid-network guidance features.
    std::pair<Tensor, Tensor> guidance(const GeneratedScene& g) const;

    uint64_t dataset_hash() const;  // FNV-1a over every scene's bytes

private:
    DatasetSpec spec_;
    PipelineConfig cfg_;
    Tensor class_vectors_;
    std::vector<std::string> class_names_;
    std::vector<std::string> prompts_;
};

// Scene container round-trip for gen-data export / external ingestion.
NamedArrays scene_to_arrays(const GeneratedScene& g);
GeneratedScene scene_from_arrays(const NamedArrays& arrays);

}  // namespace salseg

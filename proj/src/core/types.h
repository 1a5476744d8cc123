#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/config.h"
#include "core/tensor.h"

namespace salseg {

// Image embeddings [H, W, D_enc] plus text embeddings [N_C, D_enc]; the
// pipeline's only numeric input.
struct EmbeddingPair {
    Tensor image;  // [H, W, D_enc]
    Tensor text;   // [N_C, D_enc]
    std::vector<std::string> class_names;

    static EmbeddingPair make(Tensor image, Tensor text, std::vector<std::string> class_names);
    int grid_h() const { return image.dim(0); }
    int grid_w() const { return image.dim(1); }
    int n_classes() const { return text.dim(0); }
    int d_enc() const { return text.dim(1); }
};

// Post-softmax cross attention [HW, N_C]; each class column sums to 1.
struct AttentionMap {
    Tensor values;  // [HW, N_C]

    static AttentionMap make(Tensor values);
    int tokens() const { return values.dim(0); }
    int n_classes() const { return values.dim(1); }
};

// Gradient-reweighted attention, non-negative, reshaped to the grid.
struct SaliencyStack {
    Tensor maps;          // [H, W, N_C], entries >= 0
    AttentionMap source;  // the attention it derives from

    static SaliencyStack make(Tensor maps, AttentionMap source);
};

enum class VolumeStage { raw, pixel, fused, aggregated };

const char* stage_name(VolumeStage s);

// Per-pixel, per-class feature volume [H, W, N_C, D]; the object every
// refinement stage rewrites. Stage transitions are raw -> pixel -> fused ->
// aggregated and are checked by the consuming operations.
struct CorrelationVolume {
    Tensor values;  // [H, W, N_C, D]
    VolumeStage stage = VolumeStage::raw;

    static CorrelationVolume make(Tensor values, VolumeStage stage);
    int grid_h() const { return values.dim(0); }
    int grid_w() const { return values.dim(1); }
    int n_classes() const { return values.dim(2); }
    int channels() const { return values.dim(3); }
};

// Internal compute layout: class-major token rows. Row n*HW + t holds the D
// channels of class n at flattened token t.
Tensor volume_to_rows(const Tensor& v);                                // [H,W,N_C,D] -> [N_C*HW, D]
Tensor rows_to_volume(const Tensor& rows, int h, int w, int n_classes);// inverse

enum class TiePolicy { lowest_index };

// Per-class binary foreground mask over the flattened token grid. Every class
// column carries exactly min(k, HW) foreground entries.
struct TokenPartition {
    std::vector<uint8_t> fg;  // [HW * N_C], token-major: fg[t * n_classes + n]
    int tokens = 0;
    int n_classes = 0;
    int k = 0;
    TiePolicy tie_policy = TiePolicy::lowest_index;

    bool is_fg(int token, int cls) const {
        return fg[static_cast<size_t>(token) * n_classes + cls] != 0;
    }
    int fg_count(int cls) const;
    std::vector<int> fg_tokens(int cls) const;
    std::vector<int> bg_tokens(int cls) const;
    void validate() const;  // throws ValidationError on a broken column
};

enum class Branch { foreground, background };

const char* branch_name(Branch b);

// Category prototypes [1, N_C, D] and the branch-wide semantic prototype
// [1, 1, D]; the semantic prototype is shared by every class of the branch.
struct PrototypeSet {
    Tensor category;  // [1, N_C, D]
    Tensor semantic;  // [1, 1, D]
    Branch branch = Branch::foreground;

    static PrototypeSet make(Tensor category, Tensor semantic, Branch branch);
};

// Final logits [H_out, W_out, N_C] and the argmax mask. H_out = 4*H.
struct SegmentationOutput {
    Tensor logits;             // [4H, 4W, N_C]
    std::vector<int32_t> mask; // [4H * 4W], argmax with lowest-index ties

    static SegmentationOutput make(Tensor logits);
    int out_h() const { return logits.dim(0); }
    int out_w() const { return logits.dim(1); }
};

}  // namespace salseg

#pragma once

#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "core/config.h"
#include "core/types.h"
#include "decode/aggregate.h"
#include "params.h"

namespace salseg {

// Pipeline wiring switches; the ablation suites toggle these.
struct Variant {
    enum class Disentangle { none, saliency, token_supervised, class_taxonomy };
    Disentangle disentangle = Disentangle::saliency;
    bool pixel_on = true;
    bool category_on = true;
    bool semantic_on = true;
    AggKind agg = AggKind::weighted;

    static Variant full() { return Variant{}; }
    std::string describe() const;
};

// Ground-truth access used by training forwards. Inference never calls it;
// the audit stubs it with the throwing implementation below.
class LabelProvider {
public:
    virtual ~LabelProvider() = default;
    virtual const std::vector<int32_t>& grid_labels() const = 0;  // [HW]
    virtual const std::vector<int32_t>& out_labels() const = 0;   // [16*HW]
};

class SceneLabels final : public LabelProvider {
public:
    SceneLabels(std::vector<int32_t> grid, std::vector<int32_t> out)
        : grid_(std::move(grid)), out_(std::move(out)) {}
    const std::vector<int32_t>& grid_labels() const override { return grid_; }
    const std::vector<int32_t>& out_labels() const override { return out_; }

private:
    std::vector<int32_t> grid_;
    std::vector<int32_t> out_;
};

// Fails loudly on any label access; the inference path must complete with
// this installed.
class ThrowingLabelProvider final : public LabelProvider {
public:
    const std::vector<int32_t>& grid_labels() const override;
    const std::vector<int32_t>& out_labels() const override;
};

struct StageTimes {
    double cross_attend = 0, itm = 0, saliency = 0, correlation = 0, partition = 0;
    double pixel = 0, prototypes = 0, fuse = 0, aggregate = 0, decode = 0;
    double total = 0;
    double saliency_path() const { return cross_attend + itm + saliency; }
};

struct ForwardResult {
    AttentionMap attention;
    bool has_saliency = false;
    SaliencyStack saliency;
    bool has_partition = false;
    TokenPartition partition;
    Tape::Var logits = -1;  // [16*HW, N_C] rows on the caller's tape
    SegmentationOutput output;
    Tape::Var ce_loss = -1;   // set when labels were provided
    Tape::Var aux_loss = -1;  // image-text matching or supervision variant
    StageTimes times;
    std::vector<std::string> trace;
};

struct ForwardInputs {
    const EmbeddingPair& pair;
    const Tensor& guid1;  // [H, W, D_enc]
    const Tensor& guid2;
};

class Model {
public:
    Model(PipelineConfig cfg, Variant variant);

    void init_params();  // deterministic in cfg.seed
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    const PipelineConfig& config() const { return cfg_; }
    const Variant& variant() const { return variant_; }
    void set_variant(Variant v) { variant_ = v; }

    // class name -> branch mapping for the class-taxonomy variant; must cover
    // every class at forward time.
    void set_taxonomy(std::map<std::string, Branch> taxonomy);

    // Builds the whole pipeline graph on the binder's tape. labels == nullptr
    // is the inference path (no loss vars, no label access). The caller owns
    // the binder so one set of parameter leaves is shared across a batch;
    // itm_rng drives negative-pair sampling and is required when labels are
    // given under the saliency variant.
    ForwardResult forward(Binder& bind, const ForwardInputs& in, const LabelProvider* labels,
                          std::mt19937_64* itm_rng, bool want_trace = false) const;

    // Inference convenience on a private tape.
    ForwardResult infer(const ForwardInputs& in, bool want_trace = false) const;

private:
    PipelineConfig cfg_;
    Variant variant_;
    ParamStore params_;
    std::optional<std::map<std::string, Branch>> taxonomy_;
};

}  // namespace salseg

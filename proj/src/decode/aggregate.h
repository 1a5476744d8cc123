#pragma once

#include <random>

#include "core/config.h"
#include "core/types.h"
#include "params.h"

namespace salseg {

enum class AggKind { weighted, hard, attention };

const char* agg_name(AggKind k);

// Branch recombination. Both branch volumes carry zeros off-branch, so the
// per-channel convex blend g*C_f + (1-g)*C_b is exactly the mask-index
// reassembly. A two-block unmasked window attention smooths the merged map.
void init_aggregator(ParamStore& store, const PipelineConfig& cfg, std::mt19937_64& rng);

// One class: cf/cb are [HW, D] branch rows.
Tape::Var aggregate_class_forward(Binder& bind, const PipelineConfig& cfg, AggKind kind, int cls,
                                  Tape::Var cf, Tape::Var cb);

// The misalignment-smoothing attention block (all tokens visible).
Tape::Var smooth_forward(Binder& bind, const PipelineConfig& cfg, Tape::Var x);

// Value-level ops; inputs must be fused-stage volumes produced under `part`.
CorrelationVolume aggregate(const CorrelationVolume& cf, const CorrelationVolume& cb,
                            const TokenPartition& part, const ParamStore& store,
                            const PipelineConfig& cfg);
CorrelationVolume hard_aggregate(const CorrelationVolume& cf, const CorrelationVolume& cb,
                                 const TokenPartition& part, const ParamStore& store,
                                 const PipelineConfig& cfg);
CorrelationVolume attn_aggregate(const CorrelationVolume& cf, const CorrelationVolume& cb,
                                 const TokenPartition& part, const ParamStore& store,
                                 const PipelineConfig& cfg);

}  // namespace salseg

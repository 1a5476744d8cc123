#pragma once

#include <random>
#include <vector>

#include "core/config.h"
#include "core/types.h"
#include "params.h"

namespace salseg {

// Upsampling decoder: two identical transposed-convolution stages (kernel 2,
// stride 2), each followed by guidance injection, then a per-class 1x1 head
// reducing the D axis. Classes share weights; the class axis is batch-like.
void init_decoder(ParamStore& store, const PipelineConfig& cfg, std::mt19937_64& rng);

// class_vols[n] is class n's [HW, D] slice of the aggregated volume.
// fv / g1 / g2 are [HW, D_enc] constants. Returns logits rows [16*HW, N_C].
Tape::Var decode_forward(Binder& bind, const PipelineConfig& cfg,
                         const std::vector<Tape::Var>& class_vols, Tape::Var fv, Tape::Var g1,
                         Tape::Var g2);

SegmentationOutput decode(const CorrelationVolume& c_tilde, const EmbeddingPair& pair,
                          const Tensor& guid1, const Tensor& guid2, const ParamStore& store,
                          const PipelineConfig& cfg);

}  // namespace salseg

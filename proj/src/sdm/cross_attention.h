#pragma once

#include <random>

#include "core/config.h"
#include "core/types.h"
#include "params.h"

namespace salseg {

// Text-query / image-key-value cross attention. Inputs are projected to
// d_attn once; each layer applies multi-head attention with a residual on the
// text stream. The exposed map is the final layer's head-averaged attention,
// softmaxed over the token axis, transposed to [HW, N_C].
void init_cross_attention(ParamStore& store, const PipelineConfig& cfg, std::mt19937_64& rng);

// Returns the attention map var [HW, N_C].
Tape::Var cross_attention_forward(Binder& bind, const PipelineConfig& cfg, Tape::Var text,
                                  Tape::Var image_tokens);

AttentionMap cross_attend(const EmbeddingPair& pair, const ParamStore& store,
                          const PipelineConfig& cfg);

}  // namespace salseg

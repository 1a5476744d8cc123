#pragma once

#include <random>

#include "core/config.h"
#include "core/types.h"
#include "params.h"

namespace salseg {

// Per (pixel, class) cosine between image and text embeddings, lifted to D
// channels by one learned affine layer shared across classes.
void init_correlation(ParamStore& store, const PipelineConfig& cfg, std::mt19937_64& rng);

// Cosine scores [HW, N_C]. Throws ZeroNormError on a zero-norm embedding row.
Tensor cosine_similarity(const EmbeddingPair& pair);

// Lifts a cosine matrix to class-major rows [N_C*HW, D] on the tape.
Tape::Var correlation_forward(Binder& bind, const PipelineConfig& cfg, const Tensor& cosine);

CorrelationVolume correlation(const EmbeddingPair& pair, const ParamStore& store,
                              const PipelineConfig& cfg);

}  // namespace salseg

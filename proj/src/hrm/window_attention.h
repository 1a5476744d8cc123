#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "core/config.h"
#include "core/types.h"
#include "params.h"

namespace salseg {

// One masked window-attention block: single-head attention of width D among
// the visible tokens of each window, out-projected; invisible tokens pass
// through unchanged, and a window with no visible tokens is the identity.
// Windows whose origin is shifted off-grid become partial windows, which is
// equivalent to zero-padding the grid with invisible tokens and cropping.
void init_window_block(ParamStore& store, const std::string& prefix, int d,
                       std::mt19937_64& rng);

Tape::Var window_block_forward(Binder& bind, const std::string& prefix, Tape::Var x, int grid_h,
                               int grid_w, const std::vector<uint8_t>& visible, int window,
                               int offset);

// Two sequential blocks: non-shifted, then shifted by window/2.
Tape::Var refine_tokens_forward(Binder& bind, const std::string& prefix, Tape::Var x, int grid_h,
                                int grid_w, const std::vector<uint8_t>& visible, int window);

void init_pixel_refine(ParamStore& store, const std::string& branch_prefix, int d,
                       std::mt19937_64& rng);

// Per-class masked refinement of one branch volume; classes never mix.
CorrelationVolume pixel_refine(const CorrelationVolume& c_branch, const TokenPartition& part,
                               Branch branch, const ParamStore& store, const PipelineConfig& cfg);

// Window index sets for one block configuration; exposed for the structural
// shift-coverage test.
std::vector<std::vector<int>> window_index_sets(int grid_h, int grid_w, int window, int offset);

}  // namespace salseg

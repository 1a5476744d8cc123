#pragma once

#include <random>
#include <string>

#include "core/config.h"
#include "core/types.h"
#include "params.h"

namespace salseg {

// Channel gate per class: sigmoid(MLP(concat(P^c_i, P^s))), one hidden layer
// of width D over the 2D concat, broadcast over the spatial grid.
void init_gate(ParamStore& store, const std::string& branch_prefix, int d, std::mt19937_64& rng);

Tape::Var fuse_gate_forward(Binder& bind, const std::string& branch_prefix, Tape::Var category_row,
                            Tape::Var semantic_row);  // [1,D]x[1,D] -> [1,D] in (0,1)

CorrelationVolume fuse(const CorrelationVolume& c_prime, const PrototypeSet& protos,
                       const ParamStore& store);

}  // namespace salseg

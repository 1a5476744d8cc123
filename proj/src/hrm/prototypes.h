#pragma once

#include <random>
#include <string>
#include <vector>

#include "core/config.h"
#include "core/types.h"
#include "params.h"

namespace salseg {

// Dual-pooled prototypes. Category: per class, average and max pooling over
// the branch-visible positions, each through its own two-layer MLP, summed.
// Semantic: the same reduction over the class axis of the category
// prototypes, with separate MLPs, shared by every class of the branch.
void init_prototypes(ParamStore& store, const std::string& branch_prefix, int d,
                     std::mt19937_64& rng);

Tape::Var mlp2_forward(Binder& bind, const std::string& prefix, Tape::Var x);

// class_rows[i] is class i's [HW, D] slice; visible_idx[i] its pooled rows.
// Throws EmptyBranchError when a class has no visible tokens.
Tape::Var category_prototype_forward(Binder& bind, const std::string& branch_prefix,
                                     const std::vector<Tape::Var>& class_rows,
                                     const std::vector<std::vector<int>>& visible_idx);

Tape::Var semantic_prototype_forward(Binder& bind, const std::string& branch_prefix,
                                     Tape::Var category);  // [N_C, D] -> [1, D]

// Value-level ops.
Tensor category_prototype(const CorrelationVolume& c_prime, const TokenPartition& part,
                          Branch branch, const ParamStore& store);  // [1, N_C, D]
Tensor semantic_prototype(const Tensor& category, Branch branch, const ParamStore& store);  // [1,1,D]

}  // namespace salseg

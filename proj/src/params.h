#pragma once

#include <map>
#include <random>
#include <string>

#include "autodiff/tape.h"
#include "core/tensor.h"

namespace salseg {

// All learned tensors of a model, keyed by a stable dotted path. Iteration
// order is lexicographic, which keeps initialization, optimizer sweeps and
// checkpoints deterministic.
class ParamStore {
public:
    Tensor& add(const std::string& name, Tensor init);
    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;
    bool has(const std::string& name) const { return params_.count(name) != 0; }

    std::map<std::string, Tensor>& all() { return params_; }
    const std::map<std::string, Tensor>& all() const { return params_; }

    long long total_count() const;

private:
    std::map<std::string, Tensor> params_;
};

// Uniform Glorot init: +-sqrt(6 / (fan_in + fan_out)) for 2-D weights, scaled
// by total size elsewhere.
Tensor xavier_init(std::vector<int> shape, std::mt19937_64& rng);

// Identity plus small Gaussian noise; keeps attention value paths close to a
// pass-through at the start of training.
Tensor near_identity_init(int n, double eps, std::mt19937_64& rng);

// Binds parameters onto one tape, lazily, as leaves (trainable) or constants
// (evaluation). Each parameter appears at most once per tape so gradients
// accumulate across every use site.
class Binder {
public:
    Binder(Tape& tape, const ParamStore& store, bool trainable)
        : tape_(tape), store_(store), trainable_(trainable) {}

    Tape::Var operator()(const std::string& name);

    const std::map<std::string, Tape::Var>& bound() const { return bound_; }
    Tape& tape() { return tape_; }

private:
    Tape& tape_;
    const ParamStore& store_;
    bool trainable_;
    std::map<std::string, Tape::Var> bound_;
};

}  // namespace salseg

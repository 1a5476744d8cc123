#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "core/tensor.h"

// Brute-force reference implementations. Everything here is written with
// plain loops and shares no code with the optimized modules; tests compare
// the two sides. Keep it slow and obvious.
namespace salseg::oracle {

struct AttentionResult {
    Tensor output;  // [m, dv]
    Tensor probs;   // [m, n], rows sum to 1 over visible keys
};

// Scaled dot-product attention with an optional key-visibility mask.
// q [m, dk], k [n, dk], v [n, dv]. Invisible keys get probability zero.
// Rows normalize over visible keys; requires at least one visible key.
AttentionResult naive_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                const std::vector<uint8_t>& visible, double scale);

// Central finite differences per coordinate.
std::vector<double> finite_difference(const std::function<double(const std::vector<double>&)>& f,
                                      std::vector<double> point, double h);

// Indices of the k largest values; ties break toward the lowest index.
std::vector<int> naive_topk(const std::vector<double>& values, int k);

// Column-wise mean / max of the selected rows of a [m, d] matrix.
std::vector<double> naive_avg_pool(const Tensor& rows, const std::vector<int>& idx);
std::vector<double> naive_max_pool(const Tensor& rows, const std::vector<int>& idx);

// Per-token gated recombination of two branch volumes shaped [tokens, d]:
// out = gate * fg + (1 - gate) * bg with gate given per channel.
Tensor naive_reassemble(const Tensor& fg, const Tensor& bg, const std::vector<double>& gate);

struct IouResult {
    std::vector<double> per_class;  // NaN for classes absent from both sides
    double mean = 0.0;              // over classes present in either side
};

IouResult naive_iou(const std::vector<int32_t>& pred, const std::vector<int32_t>& gt,
                    int n_classes);

// Mean cross-entropy of row-softmaxed logits against one-hot labels.
double naive_ce(const Tensor& logits, const Tensor& onehot);

// Two windowed masked-attention blocks (non-shifted then shifted by
// window/2) over an [H*W, d] token grid, enumerating windows explicitly.
// Invisible tokens pass through unchanged.
Tensor naive_window_refine(const Tensor& tokens, int h, int w,
                           const std::vector<uint8_t>& visible, int window,
                           const Tensor& wq0, const Tensor& wk0, const Tensor& wv0, const Tensor& wo0,
                           const Tensor& wq1, const Tensor& wk1, const Tensor& wv1, const Tensor& wo1);

// One windowed block with an arbitrary window-origin offset; building block
// of naive_window_refine, exposed for single-block tests.
Tensor naive_window_block(const Tensor& tokens, int h, int w,
                          const std::vector<uint8_t>& visible, int window, int offset,
                          const Tensor& wq, const Tensor& wk, const Tensor& wv, const Tensor& wo);

}  // namespace salseg::oracle

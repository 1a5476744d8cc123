#include "sdm/partition.h"

#include <algorithm>
#include <numeric>

#include "core/errors.h"

namespace salseg {

TokenPartition partition_from_scores(const Tensor& scores, int k) {
    if (scores.ndim() != 2) throw ShapeError("scores must be [HW, N_C]");
    const int hw = scores.dim(0), nc = scores.dim(1);
    if (k < 1 || k > hw) {
        throw ValidationError("k = " + std::to_string(k) + " outside [1, " + std::to_string(hw) + "]");
    }
    TokenPartition part;
    part.tokens = hw;
    part.n_classes = nc;
    part.k = k;
    part.tie_policy = TiePolicy::lowest_index;
    part.fg.assign(static_cast<size_t>(hw) * nc, 0);
    std::vector<int> order(static_cast<size_t>(hw));
    for (int n = 0; n < nc; ++n) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            const double va = scores.at(a, n), vb = scores.at(b, n);
            if (va != vb) return va > vb;
            return a < b;
        });
        for (int i = 0; i < k; ++i) {
            part.fg[static_cast<size_t>(order[static_cast<size_t>(i)]) * nc + n] = 1;
        }
    }
    part.validate();
    return part;
}

TokenPartition select_tokens(const SaliencyStack& sal, int k) {
    const int h = sal.maps.dim(0), w = sal.maps.dim(1), nc = sal.maps.dim(2);
    return partition_from_scores(sal.maps.reshaped({h * w, nc}), k);
}

std::pair<CorrelationVolume, CorrelationVolume> split_volume(const CorrelationVolume& corr,
                                                             const TokenPartition& part) {
    if (corr.stage != VolumeStage::raw) {
        throw ValidationError("split_volume expects a raw-stage volume, got stage " +
                              std::string(stage_name(corr.stage)));
    }
    const int h = corr.grid_h(), w = corr.grid_w(), nc = corr.n_classes(), d = corr.channels();
    if (part.tokens != h * w || part.n_classes != nc) {
        throw ShapeError("partition dims do not match the volume");
    }
    Tensor fg({h, w, nc, d}), bg({h, w, nc, d});
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            const int t = i * w + j;
            for (int n = 0; n < nc; ++n) {
                const bool f = part.is_fg(t, n);
                for (int c = 0; c < d; ++c) {
                    const double v = corr.values.at(i, j, n, c);
                    (f ? fg : bg).at(i, j, n, c) = v;
                }
            }
        }
    }
    return {CorrelationVolume::make(std::move(fg), VolumeStage::raw),
            CorrelationVolume::make(std::move(bg), VolumeStage::raw)};
}

}  // namespace salseg

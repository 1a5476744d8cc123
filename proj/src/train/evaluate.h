#pragma once

#include <cstdint>
#include <vector>

#include "encoders/synthetic.h"
#include "model.h"

namespace salseg {

// Count-based IoU accumulation; summing counts keeps the result independent
// of scene order.
class IouAccumulator {
public:
    explicit IouAccumulator(int n_classes);
    void add(const std::vector<int32_t>& pred, const std::vector<int32_t>& gt);

    // IoU_c = TP / (TP + FP + FN); classes absent from both sides are
    // excluded from the unweighted mean (NaN per class).
    std::vector<double> per_class() const;
    double mean() const;

private:
    std::vector<long long> tp_, fp_, fn_;
};

struct EvalResult {
    std::vector<double> per_class_iou;
    double miou = 0.0;
    int scenes = 0;
};

EvalResult evaluate(const Model& model, const SceneGenerator& gen, int max_scenes = -1);

double pixel_accuracy(const std::vector<int32_t>& pred, const std::vector<int32_t>& gt);

}  // namespace salseg

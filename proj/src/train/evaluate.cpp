#include "train/evaluate.h"

#include <cmath>
#include <limits>

#include "core/errors.h"

namespace salseg {

IouAccumulator::IouAccumulator(int n_classes)
    : tp_(static_cast<size_t>(n_classes), 0),
      fp_(static_cast<size_t>(n_classes), 0),
      fn_(static_cast<size_t>(n_classes), 0) {}

void IouAccumulator::add(const std::vector<int32_t>& pred, const std::vector<int32_t>& gt) {
    if (pred.size() != gt.size()) throw ShapeError("IoU: prediction/gt size mismatch");
    for (size_t i = 0; i < pred.size(); ++i) {
        const int p = pred[i], g = gt[i];
        if (p == g) {
            tp_[static_cast<size_t>(p)]++;
        } else {
            fp_[static_cast<size_t>(p)]++;
            fn_[static_cast<size_t>(g)]++;
        }
    }
}

std::vector<double> IouAccumulator::per_class() const {
    std::vector<double> iou(tp_.size(), std::numeric_limits<double>::quiet_NaN());
    for (size_t c = 0; c < tp_.size(); ++c) {
        const long long denom = tp_[c] + fp_[c] + fn_[c];
        if (denom > 0) iou[c] = static_cast<double>(tp_[c]) / static_cast<double>(denom);
    }
    return iou;
}

double IouAccumulator::mean() const {
    double acc = 0.0;
    int n = 0;
    for (double v : per_class()) {
        if (!std::isnan(v)) {
            acc += v;
            ++n;
        }
    }
    return n ? acc / n : 0.0;
}

EvalResult evaluate(const Model& model, const SceneGenerator& gen, int max_scenes) {
    const int n = max_scenes < 0 ? gen.spec().n_scenes
                                 : std::min(max_scenes, gen.spec().n_scenes);
    IouAccumulator acc(model.config().n_classes);
    for (int i = 0; i < n; ++i) {
        GeneratedScene scene = gen.generate(i);
        auto [g1, g2] = gen.guidance(scene);
        ForwardResult out = model.infer(ForwardInputs{scene.pair, g1, g2});
        acc.add(out.output.mask, scene.gt_out);
    }
    EvalResult r;
    r.per_class_iou = acc.per_class();
    r.miou = acc.mean();
    r.scenes = n;
    return r;
}

double pixel_accuracy(const std::vector<int32_t>& pred, const std::vector<int32_t>& gt) {
    if (pred.size() != gt.size() || pred.empty()) throw ShapeError("pixel_accuracy size mismatch");
    size_t hit = 0;
    for (size_t i = 0; i < pred.size(); ++i) hit += pred[i] == gt[i] ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(pred.size());
}

}  // namespace salseg

#pragma once

#include <map>
#include <string>

#include "encoders/synthetic.h"
#include "model.h"

namespace salseg {

struct EfficiencyReport {
    long long params_total = 0;   // analytic, from shape algebra
    long long params_walked = 0;  // brute-force checkpoint enumeration
    std::map<std::string, long long> params_by_component;
    long long macs_total = 0;  // multiply-accumulates per forward, analytic
    std::map<std::string, long long> macs_by_component;
    double median_forward_s = 0;
    double median_saliency_path_s = 0;  // cross_attend + matching head + saliency
    double saliency_fraction = 0;
    int runs = 0;
};

// Analytic parameter count per component; must agree with walking the store.
std::map<std::string, long long> parameter_formula(const PipelineConfig& cfg);

// Analytic multiply-accumulate estimate per forward (single scene, full
// variant, every token visible as the refinement upper bound).
std::map<std::string, long long> mac_formula(const PipelineConfig& cfg);

EfficiencyReport efficiency_report(const Model& model, const SceneGenerator& gen, int runs = 20);

std::string efficiency_csv(const EfficiencyReport& r);
std::string efficiency_text(const EfficiencyReport& r);

}  // namespace salseg

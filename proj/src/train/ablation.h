#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "model.h"
#include "train/trainer.h"

namespace salseg {

enum class AblationSuite { disentanglement, k_sweep, aggregation };

AblationSuite parse_suite(const std::string& name);  // ConfigError on unknown
const char* suite_name(AblationSuite s);

struct AblationRow {
    std::string name;
    Variant variant;
    int k = 0;
    double miou = 0;
    double final_loss = 0;
};

struct AblationResult {
    AblationSuite suite;
    std::vector<AblationRow> rows;
    std::string csv;  // header + one row per variant
};

// Flat `class = fg|bg` file for the class-taxonomy variant.
std::map<std::string, Branch> load_taxonomy(const std::string& path);

// Trains and evaluates every variant of the suite with a shared seed and
// dataset. The disentanglement suite requires a taxonomy covering every
// class (TaxonomyError otherwise).
AblationResult run_ablation(AblationSuite suite, const FullConfig& base,
                            const std::optional<std::map<std::string, Branch>>& taxonomy);

// Variant wirings of the disentanglement study, in table order.
std::vector<std::pair<std::string, Variant>> disentanglement_variants();

// Ratio-matched foreground counts: round(r * HW) for r in {3%, 8%, 17%}.
std::vector<int> k_sweep_values(const PipelineConfig& cfg);

}  // namespace salseg

#include "train/ablation.h"

#include <cmath>
#include <cstdio>

#include "core/errors.h"
#include "core/keyvalue.h"

namespace salseg {

AblationSuite parse_suite(const std::string& name) {
    if (name == "disentanglement") return AblationSuite::disentanglement;
    if (name == "k_sweep") return AblationSuite::k_sweep;
    if (name == "aggregation") return AblationSuite::aggregation;
    throw ConfigError("unknown ablation suite: " + name +
                      " (expected disentanglement, k_sweep or aggregation)");
}

const char* suite_name(AblationSuite s) {
    switch (s) {
        case AblationSuite::disentanglement: return "disentanglement";
        case AblationSuite::k_sweep: return "k_sweep";
        case AblationSuite::aggregation: return "aggregation";
    }
    return "?";
}

std::map<std::string, Branch> load_taxonomy(const std::string& path) {
    KeyValueFile kv = KeyValueFile::parse_file(path);
    std::map<std::string, Branch> out;
    for (const auto& [name, value] : kv.entries()) {
        if (value == "fg" || value == "foreground") {
            out[name] = Branch::foreground;
        } else if (value == "bg" || value == "background") {
            out[name] = Branch::background;
        } else {
            throw TaxonomyError("taxonomy value for `" + name + "` must be fg or bg, got " + value);
        }
    }
    return out;
}

std::vector<std::pair<std::string, Variant>> disentanglement_variants() {
    auto v = [](Variant::Disentangle d, bool px, bool cat, bool sem) {
        Variant out;
        out.disentangle = d;
        out.pixel_on = px;
        out.category_on = cat;
        out.semantic_on = sem;
        return out;
    };
    using D = Variant::Disentangle;
    return {
        {"I_no_disentangle", v(D::none, true, true, true)},
        {"II_token_level", v(D::token_supervised, true, true, true)},
        {"III_class_level", v(D::class_taxonomy, true, true, true)},
        {"IV_no_refine", v(D::saliency, false, false, false)},
        {"V_pixel", v(D::saliency, true, false, false)},
        {"VI_category", v(D::saliency, false, true, false)},
        {"VII_pixel_category", v(D::saliency, true, true, false)},
        {"VIII_full", v(D::saliency, true, true, true)},
    };
}

std::vector<int> k_sweep_values(const PipelineConfig& cfg) {
    std::vector<int> ks;
    for (double ratio : {0.03, 0.08, 0.17}) {
        ks.push_back(std::max(1, static_cast<int>(std::lround(ratio * cfg.tokens()))));
    }
    return ks;
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

AblationRow run_one(const std::string& name, const FullConfig& base, const Variant& variant,
                    const std::optional<std::map<std::string, Branch>>& taxonomy) {
    Model model(base.pipeline, variant);
    model.init_params();
    if (taxonomy) model.set_taxonomy(*taxonomy);
    SceneGenerator gen(base.dataset, base.pipeline);
    TrainResult tr = train(model, gen, base);
    AblationRow row;
    row.name = name;
    row.variant = variant;
    row.k = base.pipeline.k_fg;
    row.miou = tr.final_miou;
    row.final_loss = tr.log.empty() ? 0.0 : tr.log.back().loss_total;
    return row;
}

}  // namespace

AblationResult run_ablation(AblationSuite suite, const FullConfig& base,
                            const std::optional<std::map<std::string, Branch>>& taxonomy) {
    AblationResult result;
    result.suite = suite;
    switch (suite) {
        case AblationSuite::disentanglement: {
            if (!taxonomy) {
                throw TaxonomyError("the disentanglement suite needs a taxonomy file for the "
                                    "class-level variant");
            }
            for (int n = 0; n < base.pipeline.n_classes; ++n) {
                const std::string cname = "class" + std::to_string(n);
                if (!taxonomy->count(cname)) {
                    throw TaxonomyError("taxonomy does not cover class `" + cname + "`");
                }
            }
            for (const auto& [name, variant] : disentanglement_variants()) {
                result.rows.push_back(run_one(name, base, variant, taxonomy));
            }
            break;
        }
        case AblationSuite::k_sweep: {
            for (int k : k_sweep_values(base.pipeline)) {
                FullConfig cfg = base;
                cfg.pipeline.k_fg = k;
                result.rows.push_back(
                    run_one("k" + std::to_string(k), cfg, Variant::full(), std::nullopt));
            }
            break;
        }
        case AblationSuite::aggregation: {
            for (AggKind kind : {AggKind::attention, AggKind::hard, AggKind::weighted}) {
                Variant v = Variant::full();
                v.agg = kind;
                result.rows.push_back(
                    run_one(std::string("agg_") + agg_name(kind), base, v, std::nullopt));
            }
            break;
        }
    }
    result.csv = "name,disentangle,pixel,category,semantic,agg,k,miou,final_loss\n";
    for (const AblationRow& r : result.rows) {
        std::string desc = r.variant.describe();
        // describe() is "disentangle=X pixel=on ..."; re-split for the CSV
        std::string fields;
        for (char c : desc) fields += (c == ' ') ? ',' : c;
        // strip key= prefixes
        std::string cols;
        bool in_key = true;
        for (char c : fields) {
            if (c == '=') {
                in_key = false;
            } else if (c == ',') {
                cols += ',';
                in_key = true;
            } else if (!in_key) {
                cols += c;
            }
        }
        result.csv += r.name + "," + cols + "," + std::to_string(r.k) + "," + fmt(r.miou) + "," +
                      fmt(r.final_loss) + "\n";
    }
    return result;
}

}  // namespace salseg

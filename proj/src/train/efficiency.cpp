#include "train/efficiency.h"

#include <algorithm>
#include <cstdio>

#include "sdm/itm.h"

namespace salseg {

std::map<std::string, long long> parameter_formula(const PipelineConfig& cfg) {
    const long long d = cfg.d_corr, de = cfg.d_enc, da = cfg.d_attn;
    const long long hw = cfg.tokens(), nc = cfg.n_classes, L = cfg.n_attn_layers;
    std::map<std::string, long long> p;
    p["cross_attend"] = 2 * (de * da + da) + L * 4 * da * da;
    p["itm_head"] = hw * kItmHidden + kItmHidden + kItmHidden * 2 + 2;
    p["correlation"] = d + d;
    p["token_supervision"] = 2 + 1;
    const long long mlp2 = 2 * d * d + 2 * d;          // linear-relu-linear
    const long long gate = (2 * d * d + d) + (d * d + d);
    const long long block = 4 * d * d;                 // wq wk wv wo
    p["hrm"] = 2 * (2 * block + 4 * mlp2 + gate);      // both branches
    const long long gate_w = cfg.gate_mode == GateMode::per_channel ? d : 1;
    p["aggregate"] = nc * gate_w + d + 2 * block;      // gate, attn query, smoothing
    p["decoder"] = 3 * (de * d + d) + 3 * (2 * d * d + d) + 2 * (4 * d * d + d) + (d + 1);
    return p;
}

std::map<std::string, long long> mac_formula(const PipelineConfig& cfg) {
    const long long d = cfg.d_corr, de = cfg.d_enc, da = cfg.d_attn;
    const long long hw = cfg.tokens(), nc = cfg.n_classes, L = cfg.n_attn_layers;
    const long long win = cfg.window_size;
    std::map<std::string, long long> m;
    m["cross_attend"] = nc * de * da + hw * de * da +
                        L * (2 * nc * da * da + 2 * hw * da * da + 2 * nc * hw * da);
    // head forward and its gradient per class (the x2)
    m["saliency"] = nc * 2 * (hw * kItmHidden + kItmHidden * 2);
    m["correlation"] = hw * nc * de + hw * nc * d;
    const long long block = 4 * hw * d * d + 2 * hw * win * win * d;
    m["hrm"] = 2 * 2 * nc * block                       // two branches, two blocks
               + 2 * (2 * nc * 2 * d * d + 2 * 2 * d * d)  // prototype MLPs
               + 2 * nc * (2 * d * d + d * d)              // gate MLPs
               + 2 * nc * hw * d;                          // gate application
    m["aggregate"] = 2 * nc * hw * d + 2 * nc * block;  // blend + smoothing
    m["decoder"] = 3 * hw * de * d +
                   nc * (hw * 2 * d * d + hw * 4 * d * d + 4 * hw * 2 * d * d +
                         4 * hw * 4 * d * d + 16 * hw * 2 * d * d + 16 * hw * d);
    return m;
}

EfficiencyReport efficiency_report(const Model& model, const SceneGenerator& gen, int runs) {
    EfficiencyReport r;
    r.params_by_component = parameter_formula(model.config());
    for (const auto& [k, v] : r.params_by_component) {
        (void)k;
        r.params_total += v;
    }
    r.params_walked = model.params().total_count();
    r.macs_by_component = mac_formula(model.config());
    for (const auto& [k, v] : r.macs_by_component) {
        (void)k;
        r.macs_total += v;
    }

    r.runs = std::max(runs, 1);
    GeneratedScene scene = gen.generate(0);
    auto [g1, g2] = gen.guidance(scene);
    std::vector<double> totals, sal;
    for (int i = 0; i < r.runs; ++i) {
        ForwardResult out = model.infer(ForwardInputs{scene.pair, g1, g2});
        totals.push_back(out.times.total);
        sal.push_back(out.times.saliency_path());
    }
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const size_t n = v.size();
        return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    r.median_forward_s = median(totals);
    r.median_saliency_path_s = median(sal);
    r.saliency_fraction = r.median_forward_s > 0 ? r.median_saliency_path_s / r.median_forward_s : 0;
    return r;
}

std::string efficiency_csv(const EfficiencyReport& r) {
    std::string out = "component,params,macs\n";
    for (const auto& [name, p] : r.params_by_component) {
        const auto it = r.macs_by_component.find(name);
        const long long macs = it == r.macs_by_component.end() ? 0 : it->second;
        out += name + "," + std::to_string(p) + "," + std::to_string(macs) + "\n";
    }
    // components with MACs but no own parameters
    for (const auto& [name, macs] : r.macs_by_component) {
        if (!r.params_by_component.count(name)) {
            out += name + ",0," + std::to_string(macs) + "\n";
        }
    }
    out += "total," + std::to_string(r.params_total) + "," + std::to_string(r.macs_total) + "\n";
    return out;
}

std::string efficiency_text(const EfficiencyReport& r) {
    char buf[256];
    std::string out;
    out += "parameters (analytic): " + std::to_string(r.params_total) + "\n";
    out += "parameters (walked):   " + std::to_string(r.params_walked) + "\n";
    out += "multiply-accumulates per forward: " + std::to_string(r.macs_total) + "\n";
    std::snprintf(buf, sizeof(buf), "median forward wall time over %d runs: %.6f s\n", r.runs,
                  r.median_forward_s);
    out += buf;
    std::snprintf(buf, sizeof(buf), "saliency path (attention + matching + gradients): %.6f s (%.1f%% of forward)\n",
                  r.median_saliency_path_s, 100.0 * r.saliency_fraction);
    out += buf;
    return out;
}

}  // namespace salseg

#include "train/checkpoint.h"

#include <sstream>

#include "core/container.h"
#include "core/errors.h"

namespace salseg {

Checkpoint Checkpoint::capture(const Model& model, const FullConfig& full, int64_t iteration,
                               const std::mt19937_64& rng) {
    Checkpoint c;
    c.iteration = iteration;
    c.tensors = model.params().all();
    c.config_text = full.serialize();
    c.variant_text = model.variant().describe();
    std::ostringstream os;
    os << rng;
    c.rng_state = os.str();
    return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    NamedArrays arrays;
    for (const auto& [name, t] : ckpt.tensors) arrays.put("param." + name, t);
    arrays.put_i64("meta.iteration", {ckpt.iteration}, {1});
    arrays.put_text("meta.config", ckpt.config_text);
    arrays.put_text("meta.variant", ckpt.variant_text);
    arrays.put_text("meta.rng", ckpt.rng_state);
    arrays.save(path);
}

Checkpoint load_checkpoint(const std::string& path) {
    NamedArrays arrays = NamedArrays::load(path);
    Checkpoint c;
    for (const auto& [name, t] : arrays.f64) {
        if (name.rfind("param.", 0) == 0) c.tensors[name.substr(6)] = t;
    }
    c.iteration = arrays.get_i64("meta.iteration")[0];
    c.config_text = arrays.get_text("meta.config");
    c.variant_text = arrays.get_text("meta.variant");
    c.rng_state = arrays.get_text("meta.rng");
    return c;
}

Variant parse_variant(const std::string& text) {
    Variant v;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) {
        const size_t eq = tok.find('=');
        if (eq == std::string::npos) throw ValidationError("bad variant token: " + tok);
        const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "disentangle") {
            if (val == "none") v.disentangle = Variant::Disentangle::none;
            else if (val == "saliency") v.disentangle = Variant::Disentangle::saliency;
            else if (val == "token_supervised") v.disentangle = Variant::Disentangle::token_supervised;
            else if (val == "class_taxonomy") v.disentangle = Variant::Disentangle::class_taxonomy;
            else throw ValidationError("bad disentangle value: " + val);
        } else if (key == "pixel") {
            v.pixel_on = val == "on";
        } else if (key == "category") {
            v.category_on = val == "on";
        } else if (key == "semantic") {
            v.semantic_on = val == "on";
        } else if (key == "agg") {
            if (val == "weighted") v.agg = AggKind::weighted;
            else if (val == "hard") v.agg = AggKind::hard;
            else if (val == "attn") v.agg = AggKind::attention;
            else throw ValidationError("bad agg value: " + val);
        } else {
            throw ValidationError("bad variant key: " + key);
        }
    }
    return v;
}

RestoredModel restore_model(const Checkpoint& ckpt) {
    FullConfig full = FullConfig::load_text(ckpt.config_text, "<checkpoint>");
    Model model(full.pipeline, parse_variant(ckpt.variant_text));
    model.init_params();
    for (auto& [name, t] : model.params().all()) {
        auto it = ckpt.tensors.find(name);
        if (it == ckpt.tensors.end()) throw ValidationError("checkpoint missing tensor: " + name);
        if (!it->second.same_shape(t)) {
            throw ShapeError("checkpoint tensor " + name + " has shape " + it->second.shape_str() +
                             ", expected " + t.shape_str());
        }
        t = it->second;
    }
    if (ckpt.tensors.size() != model.params().all().size()) {
        throw ValidationError("checkpoint carries unknown tensors");
    }
    return RestoredModel{std::move(full), std::move(model)};
}

}  // namespace salseg

#include "core/config.h"

#include <cstdio>

#include "core/errors.h"

namespace salseg {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

SaliencyGradMode parse_grad_mode(const std::string& s) {
    if (s == "per_class") return SaliencyGradMode::per_class;
    if (s == "batch") return SaliencyGradMode::batch;
    throw ConfigError("saliency_grad_mode must be per_class or batch, got: " + s);
}

GateMode parse_gate_mode(const std::string& s) {
    if (s == "per_channel") return GateMode::per_channel;
    if (s == "scalar") return GateMode::scalar;
    throw ConfigError("gate_mode must be per_channel or scalar, got: " + s);
}

SaliencyTrainObjective parse_train_objective(const std::string& s) {
    if (s == "score") return SaliencyTrainObjective::score;
    if (s == "loss") return SaliencyTrainObjective::loss;
    throw ConfigError("saliency_train_objective must be score or loss, got: " + s);
}

}  // namespace

PipelineConfig PipelineConfig::read(KeyValueFile& kv) {
    PipelineConfig c;
    c.grid_h = kv.get_int("grid_h", c.grid_h);
    c.grid_w = kv.get_int("grid_w", c.grid_w);
    c.n_classes = kv.get_int("n_classes", c.n_classes);
    c.d_corr = kv.get_int("d_corr", c.d_corr);
    c.d_enc = kv.get_int("d_enc", c.d_enc);
    c.d_attn = kv.get_int("d_attn", c.d_attn);
    c.n_attn_heads = kv.get_int("n_attn_heads", c.n_attn_heads);
    c.n_attn_layers = kv.get_int("n_attn_layers", c.n_attn_layers);
    c.k_fg = kv.get_int("k_fg", c.k_fg);
    c.window_size = kv.get_int("window_size", c.window_size);
    c.itm_weight = kv.get_double("itm_weight", c.itm_weight);
    c.seed = kv.get_long("seed", c.seed);
    c.saliency_grad_mode = parse_grad_mode(kv.get_string("saliency_grad_mode", "per_class"));
    c.saliency_train_objective =
        parse_train_objective(kv.get_string("saliency_train_objective", "score"));
    c.gate_mode = parse_gate_mode(kv.get_string("gate_mode", "per_channel"));
    return c;
}

std::map<std::string, std::string> PipelineConfig::entries() const {
    return {
        {"grid_h", std::to_string(grid_h)},
        {"grid_w", std::to_string(grid_w)},
        {"n_classes", std::to_string(n_classes)},
        {"d_corr", std::to_string(d_corr)},
        {"d_enc", std::to_string(d_enc)},
        {"d_attn", std::to_string(d_attn)},
        {"n_attn_heads", std::to_string(n_attn_heads)},
        {"n_attn_layers", std::to_string(n_attn_layers)},
        {"k_fg", std::to_string(k_fg)},
        {"window_size", std::to_string(window_size)},
        {"itm_weight", fmt_double(itm_weight)},
        {"seed", std::to_string(seed)},
        {"saliency_grad_mode",
         saliency_grad_mode == SaliencyGradMode::per_class ? "per_class" : "batch"},
        {"saliency_train_objective",
         saliency_train_objective == SaliencyTrainObjective::score ? "score" : "loss"},
        {"gate_mode", gate_mode == GateMode::per_channel ? "per_channel" : "scalar"},
    };
}

PipelineConfig validate_config(const PipelineConfig& cfg) {
    require(cfg.grid_h > 0, "grid_h must be positive");
    require(cfg.grid_w > 0, "grid_w must be positive");
    require(cfg.n_classes >= 2, "n_classes must be >= 2");
    require(cfg.d_corr > 0, "d_corr must be positive");
    require(cfg.d_enc > 0, "d_enc must be positive");
    require(cfg.d_attn > 0, "d_attn must be positive");
    require(cfg.n_attn_heads > 0, "n_attn_heads must be positive");
    require(cfg.d_attn % cfg.n_attn_heads == 0, "n_attn_heads must divide d_attn");
    require(cfg.n_attn_layers > 0, "n_attn_layers must be positive");
    require(cfg.k_fg > 0, "k_fg must be positive");
    require(cfg.k_fg <= cfg.tokens(),
            "k_fg (" + std::to_string(cfg.k_fg) + ") exceeds token count (" +
                std::to_string(cfg.tokens()) + ")");
    require(cfg.window_size > 0, "window_size must be positive");
    require(cfg.itm_weight >= 0.0, "itm_weight must be >= 0");
    return cfg;
}

DatasetSpec DatasetSpec::read(KeyValueFile& kv) {
    DatasetSpec s;
    s.n_scenes = kv.get_int("n_scenes", s.n_scenes);
    s.n_classes = kv.get_int("n_classes", s.n_classes);
    s.image_size = kv.get_int("image_size", s.image_size);
    s.fg_confusability = kv.get_double("fg_confusability", s.fg_confusability);
    s.noise_sigma = kv.get_double("noise_sigma", s.noise_sigma);
    s.seed = kv.get_long("seed", s.seed);
    return s;
}

std::map<std::string, std::string> DatasetSpec::entries() const {
    return {
        {"n_scenes", std::to_string(n_scenes)},
        {"n_classes", std::to_string(n_classes)},
        {"image_size", std::to_string(image_size)},
        {"fg_confusability", fmt_double(fg_confusability)},
        {"noise_sigma", fmt_double(noise_sigma)},
        {"seed", std::to_string(seed)},
    };
}

DatasetSpec validate_spec(const DatasetSpec& spec, const PipelineConfig& cfg) {
    require(spec.n_scenes > 0, "n_scenes must be positive");
    require(spec.n_classes >= 2, "dataset n_classes must be >= 2");
    require(spec.n_classes == cfg.n_classes, "dataset n_classes must match pipeline n_classes");
    require(spec.fg_confusability >= 0.0 && spec.fg_confusability < 1.0,
            "fg_confusability must lie in [0,1)");
    require(spec.noise_sigma >= 0.0, "noise_sigma must be >= 0");
    // Output resolution is 4x the grid; the image must pool evenly onto both.
    require(spec.image_size > 0, "image_size must be positive");
    require(spec.image_size % (4 * cfg.grid_h) == 0 && spec.image_size % (4 * cfg.grid_w) == 0,
            "image_size must be a multiple of 4x the grid dims");
    require(cfg.d_enc >= spec.n_classes + 1,
            "d_enc must be >= n_classes + 1 for the planted-vector construction");
    return spec;
}

TrainConfig TrainConfig::read(KeyValueFile& kv) {
    TrainConfig t;
    t.total_iters = kv.get_int("total_iters", t.total_iters);
    t.batch_size = kv.get_int("batch_size", t.batch_size);
    t.lr_main = kv.get_double("lr_main", t.lr_main);
    t.lr_encoder = kv.get_double("lr_encoder", t.lr_encoder);
    t.weight_decay = kv.get_double("weight_decay", t.weight_decay);
    t.warmup_frac = kv.get_double("warmup_frac", t.warmup_frac);
    t.ce_weight = kv.get_double("ce_weight", t.ce_weight);
    t.itm_weight = kv.get_double("itm_weight", t.itm_weight);
    t.checkpoint_every = kv.get_int("checkpoint_every", t.checkpoint_every);
    t.eval_every = kv.get_int("eval_every", t.eval_every);
    return t;
}

std::map<std::string, std::string> TrainConfig::entries() const {
    return {
        {"total_iters", std::to_string(total_iters)},
        {"batch_size", std::to_string(batch_size)},
        {"lr_main", fmt_double(lr_main)},
        {"lr_encoder", fmt_double(lr_encoder)},
        {"weight_decay", fmt_double(weight_decay)},
        {"warmup_frac", fmt_double(warmup_frac)},
        {"ce_weight", fmt_double(ce_weight)},
        {"itm_weight", fmt_double(itm_weight)},
        {"checkpoint_every", std::to_string(checkpoint_every)},
        {"eval_every", std::to_string(eval_every)},
    };
}

TrainConfig validate_train(const TrainConfig& cfg) {
    require(cfg.total_iters > 0, "total_iters must be positive");
    require(cfg.batch_size > 0, "batch_size must be positive");
    require(cfg.lr_main >= 0.0, "lr_main must not be negative");
    require(cfg.lr_encoder >= 0.0, "lr_encoder must not be negative");
    require(cfg.weight_decay >= 0.0, "weight_decay must be >= 0");
    require(cfg.warmup_frac >= 0.0 && cfg.warmup_frac < 1.0, "warmup_frac must lie in [0,1)");
    require(cfg.ce_weight >= 0.0, "ce_weight must be >= 0");
    require(cfg.itm_weight >= 0.0, "itm_weight must be >= 0");
    require(cfg.checkpoint_every > 0, "checkpoint_every must be positive");
    require(cfg.eval_every > 0, "eval_every must be positive");
    return cfg;
}

FullConfig FullConfig::load_file(const std::string& path) {
    KeyValueFile kv = KeyValueFile::parse_file(path);
    FullConfig full;
    full.pipeline = validate_config(PipelineConfig::read(kv));
    full.dataset = DatasetSpec::read(kv);
    full.train = validate_train(TrainConfig::read(kv));
    kv.finish();
    full.dataset = validate_spec(full.dataset, full.pipeline);
    return full;
}

FullConfig FullConfig::load_text(const std::string& text, const std::string& origin) {
    KeyValueFile kv = KeyValueFile::parse_text(text, origin);
    FullConfig full;
    full.pipeline = validate_config(PipelineConfig::read(kv));
    full.dataset = DatasetSpec::read(kv);
    full.train = validate_train(TrainConfig::read(kv));
    kv.finish();
    full.dataset = validate_spec(full.dataset, full.pipeline);
    return full;
}

std::string FullConfig::serialize() const {
    std::map<std::string, std::string> merged = pipeline.entries();
    for (const auto& [k, v] : dataset.entries()) merged[k] = v;
    for (const auto& [k, v] : train.entries()) merged[k] = v;
    return KeyValueFile::serialize(merged);
}

}  // namespace salseg

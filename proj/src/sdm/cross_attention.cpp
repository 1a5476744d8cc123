#include "sdm/cross_attention.h"

#include <cmath>

#include "core/errors.h"

namespace salseg {

void init_cross_attention(ParamStore& store, const PipelineConfig& cfg, std::mt19937_64& rng) {
    store.add("sdm.xattn.text_proj.w", xavier_init({cfg.d_enc, cfg.d_attn}, rng));
    store.add("sdm.xattn.text_proj.b", Tensor({cfg.d_attn}));
    store.add("sdm.xattn.img_proj.w", xavier_init({cfg.d_enc, cfg.d_attn}, rng));
    store.add("sdm.xattn.img_proj.b", Tensor({cfg.d_attn}));
    for (int l = 0; l < cfg.n_attn_layers; ++l) {
        const std::string p = "sdm.xattn.layer" + std::to_string(l) + ".";
        store.add(p + "wq", xavier_init({cfg.d_attn, cfg.d_attn}, rng));
        store.add(p + "wk", xavier_init({cfg.d_attn, cfg.d_attn}, rng));
        store.add(p + "wv", xavier_init({cfg.d_attn, cfg.d_attn}, rng));
        store.add(p + "wo", xavier_init({cfg.d_attn, cfg.d_attn}, rng));
    }
}

Tape::Var cross_attention_forward(Binder& bind, const PipelineConfig& cfg, Tape::Var text,
                                  Tape::Var image_tokens) {
    Tape& t = bind.tape();
    if (t.val(text).dim(1) != cfg.d_enc || t.val(image_tokens).dim(1) != cfg.d_enc) {
        throw ShapeError("cross_attention: embedding width does not match config");
    }
    const int nc = t.val(text).dim(0);
    const int hw = t.val(image_tokens).dim(0);
    const int heads = cfg.n_attn_heads;
    const int dh = cfg.d_attn / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Tape::Var tq = t.linear(text, bind("sdm.xattn.text_proj.w"), bind("sdm.xattn.text_proj.b"));
    Tape::Var kv = t.linear(image_tokens, bind("sdm.xattn.img_proj.w"), bind("sdm.xattn.img_proj.b"));

    Tape::Var attn_mean = -1;  // final layer head average [N_C, HW]
    for (int l = 0; l < cfg.n_attn_layers; ++l) {
        const std::string p = "sdm.xattn.layer" + std::to_string(l) + ".";
        Tape::Var q = t.matmul(tq, bind(p + "wq"));
        Tape::Var k = t.matmul(kv, bind(p + "wk"));
        Tape::Var v = t.matmul(kv, bind(p + "wv"));
        Tape::Var merged = -1;
        attn_mean = -1;
        for (int h = 0; h < heads; ++h) {
            Tape::Var qh = t.slice_cols(q, h * dh, (h + 1) * dh);
            Tape::Var kh = t.slice_cols(k, h * dh, (h + 1) * dh);
            Tape::Var vh = t.slice_cols(v, h * dh, (h + 1) * dh);
            Tape::Var scores = t.scale(t.matmul(qh, t.transpose(kh)), scale);  // [N_C, HW]
            Tape::Var probs = t.softmax_rows(scores);
            Tape::Var oh = t.matmul(probs, vh);  // [N_C, dh]
            merged = (h == 0) ? oh : t.concat_cols(merged, oh);
            attn_mean = (h == 0) ? probs : t.add(attn_mean, probs);
        }
        attn_mean = t.scale(attn_mean, 1.0 / heads);
        tq = t.add(tq, t.matmul(merged, bind(p + "wo")));  // residual text stream
    }
    (void)nc;
    (void)hw;
    return t.transpose(attn_mean);  // [HW, N_C]
}

AttentionMap cross_attend(const EmbeddingPair& pair, const ParamStore& store,
                          const PipelineConfig& cfg) {
    Tape tape;
    Binder bind(tape, store, /*trainable=*/false);
    const int hw = pair.grid_h() * pair.grid_w();
    Tape::Var text = tape.constant(pair.text);
    Tape::Var image = tape.constant(pair.image.reshaped({hw, pair.d_enc()}));
    Tape::Var attn = cross_attention_forward(bind, cfg, text, image);
    return AttentionMap::make(tape.val(attn));
}

}  // namespace salseg

#include "decode/decoder.h"

#include "core/errors.h"

namespace salseg {

void init_decoder(ParamStore& store, const PipelineConfig& cfg, std::mt19937_64& rng) {
    const int d = cfg.d_corr, de = cfg.d_enc;
    for (const char* name : {"vproj", "g1proj", "g2proj"}) {
        store.add(std::string("dec.") + name + ".w", xavier_init({de, d}, rng));
        store.add(std::string("dec.") + name + ".b", Tensor({d}));
    }
    for (const char* name : {"in0", "in1", "in2"}) {
        store.add(std::string("dec.") + name + ".w", xavier_init({2 * d, d}, rng));
        store.add(std::string("dec.") + name + ".b", Tensor({d}));
    }
    store.add("dec.up1.w", xavier_init({2, 2, d, d}, rng));
    store.add("dec.up1.b", Tensor({d}));
    store.add("dec.up2.w", xavier_init({2, 2, d, d}, rng));
    store.add("dec.up2.b", Tensor({d}));
    store.add("dec.head.w", xavier_init({d, 1}, rng));
    store.add("dec.head.b", Tensor({1}));
}

Tape::Var decode_forward(Binder& bind, const PipelineConfig& cfg,
                         const std::vector<Tape::Var>& class_vols, Tape::Var fv, Tape::Var g1,
                         Tape::Var g2) {
    Tape& t = bind.tape();
    const int h = cfg.grid_h, w = cfg.grid_w, d = cfg.d_corr;
    const int hw = h * w;

    Tape::Var vg = t.linear(fv, bind("dec.vproj.w"), bind("dec.vproj.b"));  // [HW, D]
    // guidance for the x2 stage, upsampled to match
    Tape::Var g1p = t.linear(g1, bind("dec.g1proj.w"), bind("dec.g1proj.b"));
    g1p = t.reshape(t.upsample2(t.reshape(g1p, {h, w, d})), {4 * hw, d});
    // guidance for the x4 stage
    Tape::Var g2p = t.linear(g2, bind("dec.g2proj.w"), bind("dec.g2proj.b"));
    g2p = t.upsample2(t.upsample2(t.reshape(g2p, {h, w, d})));
    g2p = t.reshape(g2p, {16 * hw, d});

    Tape::Var logits = -1;
    for (size_t n = 0; n < class_vols.size(); ++n) {
        Tape::Var x = t.concat_cols(class_vols[n], vg);  // [HW, 2D]
        x = t.relu(t.linear(x, bind("dec.in0.w"), bind("dec.in0.b")));
        x = t.tconv2x2(t.reshape(x, {h, w, d}), bind("dec.up1.w"), bind("dec.up1.b"));
        x = t.reshape(x, {4 * hw, d});
        x = t.relu(t.linear(t.concat_cols(x, g1p), bind("dec.in1.w"), bind("dec.in1.b")));
        x = t.tconv2x2(t.reshape(x, {2 * h, 2 * w, d}), bind("dec.up2.w"), bind("dec.up2.b"));
        x = t.reshape(x, {16 * hw, d});
        x = t.relu(t.linear(t.concat_cols(x, g2p), bind("dec.in2.w"), bind("dec.in2.b")));
        Tape::Var cls_logit = t.linear(x, bind("dec.head.w"), bind("dec.head.b"));  // [16HW, 1]
        logits = (n == 0) ? cls_logit : t.concat_cols(logits, cls_logit);
    }
    return logits;  // [16HW, N_C]
}

SegmentationOutput decode(const CorrelationVolume& c_tilde, const EmbeddingPair& pair,
                          const Tensor& guid1, const Tensor& guid2, const ParamStore& store,
                          const PipelineConfig& cfg) {
    if (c_tilde.stage != VolumeStage::aggregated) {
        throw ValidationError("decode expects an aggregated-stage volume, got stage " +
                              std::string(stage_name(c_tilde.stage)));
    }
    const int h = c_tilde.grid_h(), w = c_tilde.grid_w(), nc = c_tilde.n_classes();
    const int d = c_tilde.channels();
    if (h != cfg.grid_h || w != cfg.grid_w || nc != cfg.n_classes || d != cfg.d_corr) {
        throw ShapeError("volume dims do not match config");
    }
    if (!guid1.same_shape(pair.image) || !guid2.same_shape(pair.image)) {
        throw ShapeError("guidance maps must match the image embedding shape");
    }
    Tape tape;
    Binder bind(tape, store, /*trainable=*/false);
    Tensor rows = volume_to_rows(c_tilde.values);
    std::vector<Tape::Var> class_vols;
    for (int n = 0; n < nc; ++n) {
        Tensor cls({h * w, d});
        for (int t = 0; t < h * w; ++t) {
            for (int c = 0; c < d; ++c) cls.at(t, c) = rows.at(n * h * w + t, c);
        }
        class_vols.push_back(tape.constant(cls));
    }
    Tape::Var fv = tape.constant(pair.image.reshaped({h * w, cfg.d_enc}));
    Tape::Var g1 = tape.constant(guid1.reshaped({h * w, cfg.d_enc}));
    Tape::Var g2 = tape.constant(guid2.reshaped({h * w, cfg.d_enc}));
    Tape::Var logits = decode_forward(bind, cfg, class_vols, fv, g1, g2);
    return SegmentationOutput::make(tape.val(logits).reshaped({4 * h, 4 * w, nc}));
}

}  // namespace salseg

#include "sdm/correlation.h"

#include <cmath>

#include "core/errors.h"

namespace salseg {

void init_correlation(ParamStore& store, const PipelineConfig& cfg, std::mt19937_64& rng) {
    store.add("sdm.corr.w", xavier_init({1, cfg.d_corr}, rng));
    store.add("sdm.corr.b", Tensor({cfg.d_corr}));
}

Tensor cosine_similarity(const EmbeddingPair& pair) {
    const int h = pair.grid_h(), w = pair.grid_w(), nc = pair.n_classes(), de = pair.d_enc();
    std::vector<double> text_norm(static_cast<size_t>(nc));
    for (int n = 0; n < nc; ++n) {
        double s = 0.0;
        for (int c = 0; c < de; ++c) s += pair.text.at(n, c) * pair.text.at(n, c);
        if (s <= 0.0) throw ZeroNormError("text embedding row " + std::to_string(n));
        text_norm[static_cast<size_t>(n)] = std::sqrt(s);
    }
    Tensor cosine({h * w, nc});
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            double s = 0.0;
            for (int c = 0; c < de; ++c) s += pair.image.at(i, j, c) * pair.image.at(i, j, c);
            if (s <= 0.0) {
                throw ZeroNormError("image embedding at (" + std::to_string(i) + "," +
                                    std::to_string(j) + ")");
            }
            const double inorm = std::sqrt(s);
            for (int n = 0; n < nc; ++n) {
                double dot = 0.0;
                for (int c = 0; c < de; ++c) dot += pair.image.at(i, j, c) * pair.text.at(n, c);
                cosine.at(i * w + j, n) = dot / (inorm * text_norm[static_cast<size_t>(n)]);
            }
        }
    }
    return cosine;
}

Tape::Var correlation_forward(Binder& bind, const PipelineConfig& cfg, const Tensor& cosine) {
    Tape& t = bind.tape();
    const int hw = cosine.dim(0), nc = cosine.dim(1);
    // class-major column vector of cosines: row n*HW + t
    Tensor col({nc * hw, 1});
    for (int n = 0; n < nc; ++n) {
        for (int tok = 0; tok < hw; ++tok) col.at(n * hw + tok, 0) = cosine.at(tok, n);
    }
    (void)cfg;
    Tape::Var c = t.constant(col);
    return t.linear(c, bind("sdm.corr.w"), bind("sdm.corr.b"));
}

CorrelationVolume correlation(const EmbeddingPair& pair, const ParamStore& store,
                              const PipelineConfig& cfg) {
    Tape tape;
    Binder bind(tape, store, /*trainable=*/false);
    Tensor cosine = cosine_similarity(pair);
    Tape::Var rows = correlation_forward(bind, cfg, cosine);
    return CorrelationVolume::make(
        rows_to_volume(tape.val(rows), pair.grid_h(), pair.grid_w(), pair.n_classes()),
        VolumeStage::raw);
}

}  // namespace salseg

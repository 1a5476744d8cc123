#include "core/types.h"

#include <cmath>

namespace salseg {

EmbeddingPair EmbeddingPair::make(Tensor image, Tensor text,
                                  std::vector<std::string> class_names) {
    if (image.ndim() != 3) throw ShapeError("image embeddings must be [H,W,D], got " + image.shape_str());
    if (text.ndim() != 2) throw ShapeError("text embeddings must be [N_C,D], got " + text.shape_str());
    if (image.dim(2) != text.dim(1)) {
        throw ShapeError("embedding width mismatch: image " + image.shape_str() + " vs text " +
                         text.shape_str());
    }
    if (static_cast<int>(class_names.size()) != text.dim(0)) {
        throw ShapeError("class_names size does not match text rows");
    }
    require_finite(image, "image embeddings");
    require_finite(text, "text embeddings");
    for (int n = 0; n < text.dim(0); ++n) {
        double norm2 = 0.0;
        for (int d = 0; d < text.dim(1); ++d) norm2 += text.at(n, d) * text.at(n, d);
        if (norm2 <= 0.0) {
            throw ValidationError("text embedding row " + std::to_string(n) + " has zero norm");
        }
    }
    EmbeddingPair p;
    p.image = std::move(image);
    p.text = std::move(text);
    p.class_names = std::move(class_names);
    return p;
}

AttentionMap AttentionMap::make(Tensor values) {
    if (values.ndim() != 2) throw ShapeError("attention map must be [HW,N_C], got " + values.shape_str());
    require_finite(values, "attention map");
    const int hw = values.dim(0);
    const int nc = values.dim(1);
    for (int n = 0; n < nc; ++n) {
        double sum = 0.0;
        for (int t = 0; t < hw; ++t) {
            double v = values.at(t, n);
            if (v < 0.0 || v > 1.0) {
                throw ValidationError("attention entry outside [0,1]");
            }
            sum += v;
        }
        if (std::fabs(sum - 1.0) > 1e-5) {
            throw ValidationError("attention column " + std::to_string(n) + " sums to " +
                                  std::to_string(sum) + ", expected 1");
        }
    }
    AttentionMap m;
    m.values = std::move(values);
    return m;
}

SaliencyStack SaliencyStack::make(Tensor maps, AttentionMap source) {
    if (maps.ndim() != 3) throw ShapeError("saliency stack must be [H,W,N_C], got " + maps.shape_str());
    require_finite(maps, "saliency stack");
    if (maps.dim(0) * maps.dim(1) != source.tokens() || maps.dim(2) != source.n_classes()) {
        throw ShapeError("saliency stack inconsistent with its attention source");
    }
    for (int i = 0; i < maps.numel(); ++i) {
        if (maps[i] < 0.0) throw ValidationError("saliency entry below zero");
    }
    SaliencyStack s;
    s.maps = std::move(maps);
    s.source = std::move(source);
    return s;
}

const char* stage_name(VolumeStage s) {
    switch (s) {
        case VolumeStage::raw: return "raw";
        case VolumeStage::pixel: return "pixel";
        case VolumeStage::fused: return "fused";
        case VolumeStage::aggregated: return "aggregated";
    }
    return "?";
}

CorrelationVolume CorrelationVolume::make(Tensor values, VolumeStage stage) {
    if (values.ndim() != 4) {
        throw ShapeError("correlation volume must be [H,W,N_C,D], got " + values.shape_str());
    }
    require_finite(values, "correlation volume");
    CorrelationVolume c;
    c.values = std::move(values);
    c.stage = stage;
    return c;
}

Tensor volume_to_rows(const Tensor& v) {
    if (v.ndim() != 4) throw ShapeError("volume_to_rows expects [H,W,N_C,D]");
    const int h = v.dim(0), w = v.dim(1), nc = v.dim(2), d = v.dim(3);
    Tensor rows({nc * h * w, d});
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            for (int n = 0; n < nc; ++n) {
                for (int c = 0; c < d; ++c) {
                    rows.at(n * h * w + i * w + j, c) = v.at(i, j, n, c);
                }
            }
        }
    }
    return rows;
}

Tensor rows_to_volume(const Tensor& rows, int h, int w, int n_classes) {
    if (rows.ndim() != 2 || rows.dim(0) != n_classes * h * w) {
        throw ShapeError("rows_to_volume: bad row count " + rows.shape_str());
    }
    const int d = rows.dim(1);
    Tensor v({h, w, n_classes, d});
    for (int n = 0; n < n_classes; ++n) {
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
                for (int c = 0; c < d; ++c) {
                    v.at(i, j, n, c) = rows.at(n * h * w + i * w + j, c);
                }
            }
        }
    }
    return v;
}

int TokenPartition::fg_count(int cls) const {
    int n = 0;
    for (int t = 0; t < tokens; ++t) n += is_fg(t, cls) ? 1 : 0;
    return n;
}

std::vector<int> TokenPartition::fg_tokens(int cls) const {
    std::vector<int> idx;
    for (int t = 0; t < tokens; ++t) {
        if (is_fg(t, cls)) idx.push_back(t);
    }
    return idx;
}

std::vector<int> TokenPartition::bg_tokens(int cls) const {
    std::vector<int> idx;
    for (int t = 0; t < tokens; ++t) {
        if (!is_fg(t, cls)) idx.push_back(t);
    }
    return idx;
}

void TokenPartition::validate() const {
    if (fg.size() != static_cast<size_t>(tokens) * n_classes) {
        throw ValidationError("token partition storage size mismatch");
    }
    const int want = std::min(k, tokens);
    for (int n = 0; n < n_classes; ++n) {
        if (fg_count(n) != want) {
            throw ValidationError("partition column " + std::to_string(n) + " has " +
                                  std::to_string(fg_count(n)) + " foreground tokens, expected " +
                                  std::to_string(want));
        }
    }
}

const char* branch_name(Branch b) {
    return b == Branch::foreground ? "foreground" : "background";
}

PrototypeSet PrototypeSet::make(Tensor category, Tensor semantic, Branch branch) {
    if (category.ndim() != 3 || category.dim(0) != 1) {
        throw ShapeError("category prototypes must be [1,N_C,D], got " + category.shape_str());
    }
    if (semantic.ndim() != 3 || semantic.dim(0) != 1 || semantic.dim(1) != 1) {
        throw ShapeError("semantic prototype must be [1,1,D], got " + semantic.shape_str());
    }
    if (semantic.dim(2) != category.dim(2)) {
        throw ShapeError("prototype channel mismatch");
    }
    require_finite(category, "category prototypes");
    require_finite(semantic, "semantic prototype");
    PrototypeSet p;
    p.category = std::move(category);
    p.semantic = std::move(semantic);
    p.branch = branch;
    return p;
}

SegmentationOutput SegmentationOutput::make(Tensor logits) {
    if (logits.ndim() != 3) {
        throw ShapeError("logits must be [H_out,W_out,N_C], got " + logits.shape_str());
    }
    require_finite(logits, "logits");
    SegmentationOutput out;
    const int h = logits.dim(0), w = logits.dim(1), nc = logits.dim(2);
    out.mask.assign(static_cast<size_t>(h) * w, 0);
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            int best = 0;
            double bv = logits.at(i, j, 0);
            for (int n = 1; n < nc; ++n) {
                double v = logits.at(i, j, n);
                if (v > bv) {  // ties keep the lowest class index
                    bv = v;
                    best = n;
                }
            }
            out.mask[static_cast<size_t>(i) * w + j] = best;
        }
    }
    out.logits = std::move(logits);
    return out;
}

}  // namespace salseg

#include "encoders/synthetic.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "core/errors.h"
#include "core/rng.h"

namespace salseg {

namespace {

constexpr uint64_t kGuidanceStream = 0x67756964ULL;  // distinct rng stream tags
constexpr uint64_t kSceneStream = 0x7363656eULL;

// Orthonormal rows from a seeded Gaussian matrix via Gram-Schmidt.
Tensor orthonormal_rows(int rows, int cols, std::mt19937_64& rng) {
    if (rows > cols) throw ConfigError("need d_enc >= n_classes + 1 for planted vectors");
    Tensor m({rows, cols});
    for (int i = 0; i < m.numel(); ++i) m[i] = gaussian(rng, 1.0);
    for (int i = 0; i < rows; ++i) {
        for (int rep = 0; rep < 2; ++rep) {  // re-orthogonalize once for stability
            for (int j = 0; j < i; ++j) {
                double dot = 0.0;
                for (int c = 0; c < cols; ++c) dot += m.at(i, c) * m.at(j, c);
                for (int c = 0; c < cols; ++c) m.at(i, c) -= dot * m.at(j, c);
            }
        }
        double norm = 0.0;
        for (int c = 0; c < cols; ++c) norm += m.at(i, c) * m.at(i, c);
        norm = std::sqrt(norm);
        if (norm < 1e-9) throw ValidationError("degenerate basis draw");
        for (int c = 0; c < cols; ++c) m.at(i, c) /= norm;
    }
    return m;
}

void hash_bytes(uint64_t& h, const void* data, size_t n) {
    const auto* p = static_cast<const uint8_t*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;  // FNV-1a
    }
}

std::string join_lines(const std::vector<std::string>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += "\n";
        out += v[i];
    }
    return out;
}

std::vector<std::string> split_lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string line;
    while (std::getline(in, line)) out.push_back(line);
    return out;
}

}  // namespace

std::vector<int32_t> majority_pool(const std::vector<int32_t>& labels, int h_in, int w_in,
                                   int h_out, int w_out) {
    if (h_in % h_out != 0 || w_in % w_out != 0) {
        throw ShapeError("majority_pool: output dims must divide input dims");
    }
    const int bh = h_in / h_out, bw = w_in / w_out;
    int32_t max_label = 0;
    for (int32_t v : labels) max_label = std::max(max_label, v);
    std::vector<int32_t> out(static_cast<size_t>(h_out) * w_out, 0);
    std::vector<int> count(static_cast<size_t>(max_label) + 1, 0);
    for (int i = 0; i < h_out; ++i) {
        for (int j = 0; j < w_out; ++j) {
            std::fill(count.begin(), count.end(), 0);
            for (int a = 0; a < bh; ++a) {
                for (int b = 0; b < bw; ++b) {
                    const int32_t v = labels[static_cast<size_t>(i * bh + a) * w_in + (j * bw + b)];
                    count[static_cast<size_t>(v)]++;
                }
            }
            int best = 0;
            for (size_t c = 1; c < count.size(); ++c) {
                if (count[c] > count[static_cast<size_t>(best)]) best = static_cast<int>(c);
            }
            out[static_cast<size_t>(i) * w_out + j] = best;  // ties keep lowest id
        }
    }
    return out;
}

SceneGenerator::SceneGenerator(DatasetSpec spec, PipelineConfig cfg)
    : spec_(std::move(spec)), cfg_(std::move(cfg)) {
    validate_config(cfg_);
    validate_spec(spec_, cfg_);
    auto rng = make_rng(static_cast<uint64_t>(spec_.seed), 0xba5e);
    Tensor basis = orthonormal_rows(spec_.n_classes + 1, cfg_.d_enc, rng);
    const double rho = spec_.fg_confusability;
    const double a = std::sqrt(1.0 - rho), b = std::sqrt(rho);
    class_vectors_ = Tensor({spec_.n_classes, cfg_.d_enc});
    for (int n = 0; n < spec_.n_classes; ++n) {
        for (int c = 0; c < cfg_.d_enc; ++c) {
            class_vectors_.at(n, c) = a * basis.at(n, c) + b * basis.at(spec_.n_classes, c);
        }
    }
    for (int n = 0; n < spec_.n_classes; ++n) {
        class_names_.push_back("class" + std::to_string(n));
        prompts_.push_back("A photo of a class" + std::to_string(n));
    }
}

GeneratedScene SceneGenerator::generate(int index) const {
    if (index < 0 || index >= spec_.n_scenes) {
        throw IndexError("scene index " + std::to_string(index) + " out of range [0," +
                         std::to_string(spec_.n_scenes) + ")");
    }
    const int h = cfg_.grid_h, w = cfg_.grid_w, nc = spec_.n_classes;
    auto rng = make_rng(static_cast<uint64_t>(spec_.seed),
                        kSceneStream + static_cast<uint64_t>(index));

    // Voronoi layout in grid coordinates; regions snap to the token grid so
    // the decoder target carries no sub-cell detail.
    std::uniform_int_distribution<int> site_count(2, 2 * nc);
    const int n_sites = site_count(rng);
    std::vector<int> perm(static_cast<size_t>(nc));
    for (int i = 0; i < nc; ++i) perm[static_cast<size_t>(i)] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> site_r(static_cast<size_t>(n_sites)), site_c(static_cast<size_t>(n_sites));
    std::vector<int> site_class(static_cast<size_t>(n_sites));
    for (int s = 0; s < n_sites; ++s) {
        site_r[static_cast<size_t>(s)] = uniform(rng, 0.0, static_cast<double>(h));
        site_c[static_cast<size_t>(s)] = uniform(rng, 0.0, static_cast<double>(w));
        site_class[static_cast<size_t>(s)] = perm[static_cast<size_t>(s % nc)];
    }

    std::vector<int32_t> cell_class(static_cast<size_t>(h) * w, 0);
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            double best = 1e300;
            int cls = 0;
            for (int s = 0; s < n_sites; ++s) {
                const double dr = (i + 0.5) - site_r[static_cast<size_t>(s)];
                const double dc = (j + 0.5) - site_c[static_cast<size_t>(s)];
                const double d2 = dr * dr + dc * dc;
                if (d2 < best) {
                    best = d2;
                    cls = site_class[static_cast<size_t>(s)];
                }
            }
            cell_class[static_cast<size_t>(i) * w + j] = cls;
        }
    }

    GeneratedScene g;
    g.scene.image_h = spec_.image_size;
    g.scene.image_w = spec_.image_size;
    g.scene.fg_confusability = spec_.fg_confusability;
    g.scene.noise_sigma = spec_.noise_sigma;
    g.scene.class_vectors = class_vectors_;
    const int ph = spec_.image_size / h, pw = spec_.image_size / w;
    g.scene.layout.assign(static_cast<size_t>(spec_.image_size) * spec_.image_size, 0);
    for (int i = 0; i < spec_.image_size; ++i) {
        for (int j = 0; j < spec_.image_size; ++j) {
            g.scene.layout[static_cast<size_t>(i) * spec_.image_size + j] =
                cell_class[static_cast<size_t>(i / ph) * w + (j / pw)];
        }
    }
    g.gt_out = majority_pool(g.scene.layout, spec_.image_size, spec_.image_size, 4 * h, 4 * w);
    g.gt_grid = majority_pool(g.gt_out, 4 * h, 4 * w, h, w);

    Tensor image({h, w, cfg_.d_enc});
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            const int cls = g.gt_grid[static_cast<size_t>(i) * w + j];
            for (int c = 0; c < cfg_.d_enc; ++c) {
                double v = class_vectors_.at(cls, c);
                if (spec_.noise_sigma > 0.0) v += spec_.noise_sigma * noise(rng);
                image.at(i, j, c) = v;
            }
        }
    }
    g.pair = EmbeddingPair::make(std::move(image), class_vectors_, class_names_);
    return g;
}

std::pair<Tensor, Tensor> SceneGenerator::guidance(const GeneratedScene& g) const {
    // Seeded off the scene content so guidance is reproducible without the
    // scene index.
    uint64_t h = 0xcbf29ce484222325ULL;
    hash_bytes(h, g.gt_grid.data(), g.gt_grid.size() * sizeof(int32_t));
    auto rng = make_rng(static_cast<uint64_t>(spec_.seed), kGuidanceStream + h);
    std::normal_distribution<double> noise(0.0, 1.0);
    Tensor g1 = g.pair.image, g2 = g.pair.image;
    for (int i = 0; i < g1.numel(); ++i) g1[i] += 0.05 * noise(rng);
    for (int i = 0; i < g2.numel(); ++i) g2[i] += 0.05 * noise(rng);
    return {std::move(g1), std::move(g2)};
}

uint64_t SceneGenerator::dataset_hash() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (int i = 0; i < spec_.n_scenes; ++i) {
        GeneratedScene g = generate(i);
        hash_bytes(h, g.scene.layout.data(), g.scene.layout.size() * sizeof(int32_t));
        hash_bytes(h, g.pair.image.data(), static_cast<size_t>(g.pair.image.numel()) * sizeof(double));
        hash_bytes(h, g.pair.text.data(), static_cast<size_t>(g.pair.text.numel()) * sizeof(double));
        hash_bytes(h, g.gt_grid.data(), g.gt_grid.size() * sizeof(int32_t));
        hash_bytes(h, g.gt_out.data(), g.gt_out.size() * sizeof(int32_t));
    }
    return h;
}

NamedArrays scene_to_arrays(const GeneratedScene& g) {
    NamedArrays a;
    a.put("image", g.pair.image);
    a.put("text", g.pair.text);
    a.put("class_vectors", g.scene.class_vectors);
    a.put("params", Tensor::from({2}, {g.scene.fg_confusability, g.scene.noise_sigma}));
    a.put_text("class_names", join_lines(g.pair.class_names));
    auto to64 = [](const std::vector<int32_t>& v) {
        return std::vector<int64_t>(v.begin(), v.end());
    };
    a.put_i64("layout", to64(g.scene.layout), {g.scene.image_h, g.scene.image_w});
    const int h = g.pair.image.dim(0), w = g.pair.image.dim(1);
    a.put_i64("gt_grid", to64(g.gt_grid), {h, w});
    a.put_i64("gt_out", to64(g.gt_out), {4 * h, 4 * w});
    return a;
}

GeneratedScene scene_from_arrays(const NamedArrays& a) {
    GeneratedScene g;
    Tensor image = a.get("image");
    Tensor text = a.get("text");
    g.pair = EmbeddingPair::make(std::move(image), std::move(text),
                                 split_lines(a.get_text("class_names")));
    g.scene.class_vectors = a.get("class_vectors");
    const Tensor& params = a.get("params");
    g.scene.fg_confusability = params[0];
    g.scene.noise_sigma = params[1];
    auto from64 = [](const std::vector<int64_t>& v) {
        return std::vector<int32_t>(v.begin(), v.end());
    };
    g.scene.layout = from64(a.get_i64("layout"));
    g.scene.image_h = a.get_i64_shape("layout")[0];
    g.scene.image_w = a.get_i64_shape("layout")[1];
    g.gt_grid = from64(a.get_i64("gt_grid"));
    g.gt_out = from64(a.get_i64("gt_out"));
    return g;
}

}  // namespace salseg

#include "encoders/external.h"

#include <algorithm>
#include <filesystem>

#include "core/errors.h"

namespace salseg {

EmbeddingPair embed_external(const Tensor& image_features, const Tensor& text_features,
                             std::vector<std::string> class_names, const PipelineConfig& cfg) {
    if (image_features.ndim() != 3 || image_features.dim(0) != cfg.grid_h ||
        image_features.dim(1) != cfg.grid_w || image_features.dim(2) != cfg.d_enc) {
        throw ShapeError("external image features " + image_features.shape_str() +
                         " do not match configured [" + std::to_string(cfg.grid_h) + "," +
                         std::to_string(cfg.grid_w) + "," + std::to_string(cfg.d_enc) + "]");
    }
    if (text_features.ndim() != 2 || text_features.dim(0) != cfg.n_classes ||
        text_features.dim(1) != cfg.d_enc) {
        throw ShapeError("external text features " + text_features.shape_str() +
                         " do not match configured [" + std::to_string(cfg.n_classes) + "," +
                         std::to_string(cfg.d_enc) + "]");
    }
    return EmbeddingPair::make(image_features, text_features, std::move(class_names));
}

std::vector<std::string> list_scene_files(const std::string& dir) {
    namespace fs = std::filesystem;
    std::vector<std::string> files;
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("scene_", 0) == 0 && entry.path().extension() == ".nar") {
            files.push_back(entry.path().string());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace salseg

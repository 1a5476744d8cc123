#pragma once

#include <string>
#include <vector>

#include "core/config.h"
#include "core/types.h"

namespace salseg {

// Adapter seam for real VLM embeddings: wraps and validates, no transform.
EmbeddingPair embed_external(const Tensor& image_features, const Tensor& text_features,
                             std::vector<std::string> class_names, const PipelineConfig& cfg);

// Loads every `scene_*.nar` container under dir, sorted by filename.
std::vector<std::string> list_scene_files(const std::string& dir);

}  // namespace salseg

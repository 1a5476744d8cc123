#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/tensor.h"

namespace salseg {

// Binary PGM (P5), one byte per pixel.
void write_pgm(const std::string& path, const std::vector<uint8_t>& pixels, int h, int w);

// Binary PPM (P6), three bytes per pixel.
void write_ppm(const std::string& path, const std::vector<uint8_t>& rgb, int h, int w);

// Min-max scales a [H, W] tensor into 0..255 (constant input maps to 0).
std::vector<uint8_t> to_grayscale(const Tensor& map);

// Colorizes an integer label mask with a fixed palette.
std::vector<uint8_t> colorize_labels(const std::vector<int32_t>& labels, int n_classes);

}  // namespace salseg

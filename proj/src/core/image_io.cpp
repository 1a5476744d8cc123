#include "core/image_io.h"

#include <algorithm>
#include <fstream>

#include "core/errors.h"

namespace salseg {

namespace {

void write_pnm(const std::string& path, const char* magic, const std::vector<uint8_t>& data,
               int h, int w, int channels) {
    if (static_cast<size_t>(h) * w * channels != data.size()) {
        throw ShapeError("pixel buffer size does not match image dims");
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << magic << "\n" << w << " " << h << "\n255\n";
    f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!f) throw IoError("short write to " + path);
}

}  // namespace

void write_pgm(const std::string& path, const std::vector<uint8_t>& pixels, int h, int w) {
    write_pnm(path, "P5", pixels, h, w, 1);
}

void write_ppm(const std::string& path, const std::vector<uint8_t>& rgb, int h, int w) {
    write_pnm(path, "P6", rgb, h, w, 3);
}

std::vector<uint8_t> to_grayscale(const Tensor& map) {
    double lo = map.numel() ? map[0] : 0.0;
    double hi = lo;
    for (int i = 0; i < map.numel(); ++i) {
        lo = std::min(lo, map[i]);
        hi = std::max(hi, map[i]);
    }
    std::vector<uint8_t> out(static_cast<size_t>(map.numel()));
    const double range = hi - lo;
    for (int i = 0; i < map.numel(); ++i) {
        double v = range > 0.0 ? (map[i] - lo) / range : 0.0;
        out[static_cast<size_t>(i)] = static_cast<uint8_t>(std::clamp(v * 255.0, 0.0, 255.0));
    }
    return out;
}

std::vector<uint8_t> colorize_labels(const std::vector<int32_t>& labels, int n_classes) {
    // Fixed palette; wraps after 12 classes.
    static const uint8_t palette[12][3] = {
        {230, 25, 75},  {60, 180, 75},   {255, 225, 25}, {0, 130, 200},
        {245, 130, 48}, {145, 30, 180},  {70, 240, 240}, {240, 50, 230},
        {210, 245, 60}, {250, 190, 212}, {0, 128, 128},  {220, 190, 255},
    };
    std::vector<uint8_t> rgb(labels.size() * 3, 0);
    for (size_t i = 0; i < labels.size(); ++i) {
        int c = labels[i] % std::max(1, std::min(n_classes, 12));
        if (c < 0) c = 0;
        rgb[i * 3 + 0] = palette[c][0];
        rgb[i * 3 + 1] = palette[c][1];
        rgb[i * 3 + 2] = palette[c][2];
    }
    return rgb;
}

}  // namespace salseg

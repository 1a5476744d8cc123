#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/tensor.h"

namespace salseg {

// Named-array container file.
//
// Layout (all integers little-endian):
//   magic   8 bytes  "SSEGNAR1"
//   count   u32      number of entries
//   entry*  repeated:
//     name_len u32, name bytes
//     dtype    u8   (1 = f64, 2 = i64, 3 = u8)
//     ndim     u32
//     dims     u64 * ndim
//     payload  row-major, dtype-sized elements
struct NamedArrays {
    std::map<std::string, Tensor> f64;
    std::map<std::string, std::vector<int64_t>> i64;        // flat payload
    std::map<std::string, std::vector<int>> i64_shapes;
    std::map<std::string, std::vector<uint8_t>> bytes;

    void put(const std::string& name, Tensor t) { f64[name] = std::move(t); }
    void put_i64(const std::string& name, std::vector<int64_t> v, std::vector<int> shape);
    void put_bytes(const std::string& name, std::vector<uint8_t> v) { bytes[name] = std::move(v); }
    void put_text(const std::string& name, const std::string& text);

    const Tensor& get(const std::string& name) const;
    const std::vector<int64_t>& get_i64(const std::string& name) const;
    const std::vector<int>& get_i64_shape(const std::string& name) const;
    std::string get_text(const std::string& name) const;
    bool has(const std::string& name) const;

    void save(const std::string& path) const;
    static NamedArrays load(const std::string& path);
};

}  // namespace salseg

#include "core/container.h"

#include <cstring>
#include <fstream>

#include "core/errors.h"

namespace salseg {

namespace {

constexpr char kMagic[8] = {'S', 'S', 'E', 'G', 'N', 'A', 'R', '1'};
constexpr uint8_t kDtypeF64 = 1;
constexpr uint8_t kDtypeI64 = 2;
constexpr uint8_t kDtypeU8 = 3;

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
    const std::string& buf;
    size_t pos = 0;
    explicit Reader(const std::string& b) : buf(b) {}
    void need(size_t n) const {
        if (pos + n > buf.size()) throw IoError("truncated container file");
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    uint8_t u8() {
        need(1);
        return static_cast<uint8_t>(buf[pos++]);
    }
    std::string str(size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
    void raw(void* dst, size_t n) {
        need(n);
        std::memcpy(dst, buf.data() + pos, n);
        pos += n;
    }
};

void write_header(std::string& out, const std::string& name, uint8_t dtype,
                  const std::vector<int>& shape) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out.append(name);
    out.push_back(static_cast<char>(dtype));
    put_u32(out, static_cast<uint32_t>(shape.size()));
    for (int d : shape) put_u64(out, static_cast<uint64_t>(d));
}

}  // namespace

void NamedArrays::put_i64(const std::string& name, std::vector<int64_t> v, std::vector<int> shape) {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    if (n != v.size()) throw ShapeError("i64 array size does not match shape");
    i64[name] = std::move(v);
    i64_shapes[name] = std::move(shape);
}

void NamedArrays::put_text(const std::string& name, const std::string& text) {
    bytes[name] = std::vector<uint8_t>(text.begin(), text.end());
}

const Tensor& NamedArrays::get(const std::string& name) const {
    auto it = f64.find(name);
    if (it == f64.end()) throw IoError("container has no f64 array `" + name + "`");
    return it->second;
}

const std::vector<int64_t>& NamedArrays::get_i64(const std::string& name) const {
    auto it = i64.find(name);
    if (it == i64.end()) throw IoError("container has no i64 array `" + name + "`");
    return it->second;
}

const std::vector<int>& NamedArrays::get_i64_shape(const std::string& name) const {
    auto it = i64_shapes.find(name);
    if (it == i64_shapes.end()) throw IoError("container has no i64 array `" + name + "`");
    return it->second;
}

std::string NamedArrays::get_text(const std::string& name) const {
    auto it = bytes.find(name);
    if (it == bytes.end()) throw IoError("container has no byte array `" + name + "`");
    return std::string(it->second.begin(), it->second.end());
}

bool NamedArrays::has(const std::string& name) const {
    return f64.count(name) || i64.count(name) || bytes.count(name);
}

void NamedArrays::save(const std::string& path) const {
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    put_u32(out, static_cast<uint32_t>(f64.size() + i64.size() + bytes.size()));
    for (const auto& [name, t] : f64) {
        write_header(out, name, kDtypeF64, t.shape());
        size_t n = static_cast<size_t>(t.numel()) * sizeof(double);
        size_t off = out.size();
        out.resize(off + n);
        std::memcpy(out.data() + off, t.data(), n);
    }
    for (const auto& [name, v] : i64) {
        write_header(out, name, kDtypeI64, i64_shapes.at(name));
        size_t n = v.size() * sizeof(int64_t);
        size_t off = out.size();
        out.resize(off + n);
        std::memcpy(out.data() + off, v.data(), n);
    }
    for (const auto& [name, v] : bytes) {
        write_header(out, name, kDtypeU8, {static_cast<int>(v.size())});
        out.append(reinterpret_cast<const char*>(v.data()), v.size());
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("short write to " + path);
}

NamedArrays NamedArrays::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Reader r(buf);
    if (r.str(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
        throw IoError(path + ": bad magic, not a named-array container");
    }
    NamedArrays arrays;
    const uint32_t count = r.u32();
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t name_len = r.u32();
        std::string name = r.str(name_len);
        const uint8_t dtype = r.u8();
        const uint32_t ndim = r.u32();
        std::vector<int> shape;
        size_t n = 1;
        for (uint32_t d = 0; d < ndim; ++d) {
            uint64_t dim = r.u64();
            shape.push_back(static_cast<int>(dim));
            n *= static_cast<size_t>(dim);
        }
        if (dtype == kDtypeF64) {
            std::vector<double> data(n);
            r.raw(data.data(), n * sizeof(double));
            arrays.f64[name] = Tensor::from(shape, std::move(data));
        } else if (dtype == kDtypeI64) {
            std::vector<int64_t> data(n);
            r.raw(data.data(), n * sizeof(int64_t));
            arrays.i64[name] = std::move(data);
            arrays.i64_shapes[name] = shape;
        } else if (dtype == kDtypeU8) {
            std::vector<uint8_t> data(n);
            r.raw(data.data(), n);
            arrays.bytes[name] = std::move(data);
        } else {
            throw IoError(path + ": unknown dtype code " + std::to_string(dtype));
        }
    }
    return arrays;
}

}  // namespace salseg

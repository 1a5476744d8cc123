#include "params.h"
#include <cmath>

#include "core/errors.h"

namespace salseg {

Tensor& ParamStore::add(const std::string& name, Tensor init) {
    auto [it, inserted] = params_.emplace(name, std::move(init));
    if (!inserted) throw ValidationError("duplicate parameter name: " + name);
    return it->second;
}

Tensor& ParamStore::get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ValidationError("unknown parameter: " + name);
    return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ValidationError("unknown parameter: " + name);
    return it->second;
}

long long ParamStore::total_count() const {
    long long n = 0;
    for (const auto& [name, t] : params_) {
        (void)name;
        n += t.numel();
    }
    return n;
}

Tensor xavier_init(std::vector<int> shape, std::mt19937_64& rng) {
    int fan_in = shape.size() >= 2 ? shape[static_cast<size_t>(shape.size()) - 2] : 1;
    int fan_out = shape.empty() ? 1 : shape.back();
    if (shape.size() == 4) fan_in = shape[0] * shape[1] * shape[2];  // conv kernels
    const double s = std::sqrt(6.0 / (fan_in + fan_out));
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(-s, s);
    for (int i = 0; i < t.numel(); ++i) t[i] = dist(rng);
    return t;
}

Tensor near_identity_init(int n, double eps, std::mt19937_64& rng) {
    Tensor t = Tensor::identity(n);
    std::normal_distribution<double> dist(0.0, eps);
    for (int i = 0; i < t.numel(); ++i) t[i] += dist(rng);
    return t;
}

Tape::Var Binder::operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    const Tensor& t = store_.get(name);
    Tape::Var v = trainable_ ? tape_.leaf(t) : tape_.constant(t);
    bound_[name] = v;
    return v;
}

}  // namespace salseg

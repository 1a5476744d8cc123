#include "core/tensor.h"

#include <cmath>
#include <sstream>

namespace salseg {

namespace {

size_t checked_numel(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) {
        if (d <= 0) {
            throw ShapeError("non-positive dimension in " + shape_to_string(shape));
        }
        n *= static_cast<size_t>(d);
    }
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(checked_numel(shape_), 0.0);
}

Tensor Tensor::full(std::vector<int> shape, double value) {
    Tensor t(std::move(shape));
    for (double& v : t.data_) v = value;
    return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> data) {
    Tensor t;
    if (checked_numel(shape) != data.size()) {
        throw ShapeError("data size " + std::to_string(data.size()) + " does not match " +
                         shape_to_string(shape));
    }
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    return t;
}

Tensor Tensor::identity(int n) {
    Tensor t({n, n});
    for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

double& Tensor::at(int i, int j) {
    return data_[static_cast<size_t>(i) * shape_[1] + j];
}
double Tensor::at(int i, int j) const {
    return data_[static_cast<size_t>(i) * shape_[1] + j];
}
double& Tensor::at(int i, int j, int k) {
    return data_[(static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k];
}
double Tensor::at(int i, int j, int k) const {
    return data_[(static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k];
}
double& Tensor::at(int i, int j, int k, int l) {
    return data_[((static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
}
double Tensor::at(int i, int j, int k, int l) const {
    return data_[((static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
}

bool Tensor::finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
    if (checked_numel(shape) != data_.size()) {
        throw ShapeError("reshape " + shape_str() + " -> " + shape_to_string(shape));
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

void require_finite(const Tensor& t, const std::string& what) {
    if (!t.finite()) {
        throw ValidationError(what + " contains NaN or Inf");
    }
}

std::string shape_to_string(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

}  // namespace salseg

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/errors.h"

namespace salseg {

// Dense row-major double tensor with an explicit shape vector. Shapes are
// always carried alongside the data; there is no implicit broadcasting.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int> shape, double value);
    static Tensor from(std::vector<int> shape, std::vector<double> data);
    static Tensor scalar(double value) { return from({1}, {value}); }
    static Tensor identity(int n);

    const std::vector<int>& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
    int numel() const { return static_cast<int>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](int i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int i) const { return data_[static_cast<size_t>(i)]; }

    double& at(int i, int j);
    double at(int i, int j) const;
    double& at(int i, int j, int k);
    double at(int i, int j, int k) const;
    double& at(int i, int j, int k, int l);
    double at(int i, int j, int k, int l) const;

    bool finite() const;
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    // Returns a copy with a new shape of identical element count.
    Tensor reshaped(std::vector<int> shape) const;

    std::string shape_str() const;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

// Throws ValidationError if the tensor contains NaN or Inf.
void require_finite(const Tensor& t, const std::string& what);

std::string shape_to_string(const std::vector<int>& shape);

}  // namespace salseg

#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "svimo/errors.hpp"

namespace svimo {

// Dense row-major tensor of doubles. Value semantics; copies copy storage.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int64_t> shape);
    Tensor(std::vector<int64_t> shape, std::vector<double> data);

    static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int64_t> shape, double value);
    static Tensor from_scalar(double value) { return Tensor({1}, {value}); }

    const std::vector<int64_t>& shape() const { return shape_; }
    int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
    int64_t dim(int64_t i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t numel() const { return numel_; }
    bool empty() const { return numel_ == 0; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // Row-major offset of a multi-index; slow path, for tests and setup code.
    int64_t offset(std::initializer_list<int64_t> idx) const;
    double& at(std::initializer_list<int64_t> idx) { return data_[static_cast<size_t>(offset(idx))]; }
    double at(std::initializer_list<int64_t> idx) const { return data_[static_cast<size_t>(offset(idx))]; }

    // Same storage, new shape (numel must match).
    Tensor reshaped(std::vector<int64_t> shape) const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;
    double max_abs() const;

    std::string shape_str() const;

private:
    std::vector<int64_t> shape_;
    std::vector<double> data_;
    int64_t numel_ = 0;
};

int64_t shape_numel(const std::vector<int64_t>& shape);
std::string shape_to_string(const std::vector<int64_t>& shape);

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
}

}  // namespace svimo

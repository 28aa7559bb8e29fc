#include "svimo/tensor.hpp"

#include <cmath>
#include <sstream>

namespace svimo {

int64_t shape_numel(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
        if (d < 0) throw ShapeError("negative dimension in shape " + shape_to_string(shape));
        n *= d;
    }
    return n;
}

std::string shape_to_string(const std::vector<int64_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(std::vector<int64_t> shape)
    : shape_(std::move(shape)), numel_(shape_numel(shape_)) {
    data_.assign(static_cast<size_t>(numel_), 0.0);
}

Tensor::Tensor(std::vector<int64_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)), numel_(shape_numel(shape_)) {
    if (static_cast<int64_t>(data_.size()) != numel_) {
        throw ShapeError("data size " + std::to_string(data_.size()) + " does not match shape " +
                         shape_to_string(shape_));
    }
}

Tensor Tensor::full(std::vector<int64_t> shape, double value) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = value;
    return t;
}

int64_t Tensor::offset(std::initializer_list<int64_t> idx) const {
    if (static_cast<int64_t>(idx.size()) != rank()) {
        throw ShapeError("index rank " + std::to_string(idx.size()) + " vs tensor rank " +
                         std::to_string(rank()));
    }
    int64_t off = 0;
    size_t i = 0;
    for (int64_t v : idx) {
        if (v < 0 || v >= shape_[i]) {
            throw ShapeError("index out of range at axis " + std::to_string(i));
        }
        off = off * shape_[i] + v;
        ++i;
    }
    return off;
}

Tensor Tensor::reshaped(std::vector<int64_t> shape) const {
    if (shape_numel(shape) != numel_) {
        throw ShapeError("reshape " + shape_str() + " -> " + shape_to_string(shape) +
                         " changes element count");
    }
    Tensor out = *this;
    out.shape_ = std::move(shape);
    return out;
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

double Tensor::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::fabs(v));
    return m;
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

}  // namespace svimo

#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cacnet/errors.hpp"

namespace cacnet {

// Dense n-dimensional array, row-major, contiguous. The last extent varies
// fastest; a [C,H,W] image stores channel planes back to back. This layout is
// fixed: reshape never moves data and checkpoints serialize the buffer as is.
template <typename T>
class Tensor {
  public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
        data_.assign(checked_size(shape_), T{});
    }

    Tensor(std::vector<std::size_t> shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (checked_size(shape_) != data_.size()) {
            throw DimensionError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                                 shape_string(shape_));
        }
    }

    static Tensor full(std::vector<std::size_t> shape, T value) {
        Tensor t(std::move(shape));
        for (auto& v : t.data_) v = value;
        return t;
    }

    std::size_t rank() const { return shape_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_[axis]; }
    std::size_t size() const { return data_.size(); }
    const std::vector<std::size_t>& shape() const { return shape_; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& storage() { return data_; }
    const std::vector<T>& storage() const { return data_; }

    T& operator[](std::size_t flat) { return data_[flat]; }
    const T& operator[](std::size_t flat) const { return data_[flat]; }

    T& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    const T& at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    T& at(std::size_t c, std::size_t y, std::size_t x) { return data_[(c * shape_[1] + y) * shape_[2] + x]; }
    const T& at(std::size_t c, std::size_t y, std::size_t x) const {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }

    // Same buffer, new extents; element count must be preserved.
    Tensor reshaped(std::vector<std::size_t> shape) const {
        if (checked_size(shape) != data_.size()) {
            throw DimensionError("reshape from " + shape_string(shape_) + " to " + shape_string(shape) +
                                 " changes element count");
        }
        return Tensor(std::move(shape), data_);
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    static std::string shape_string(const std::vector<std::size_t>& shape) {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
        os << "]";
        return os.str();
    }

    std::string shape_string() const { return shape_string(shape_); }

  private:
    static std::size_t checked_size(const std::vector<std::size_t>& shape) {
        if (shape.empty()) throw DimensionError("tensor shape must have at least one extent");
        std::size_t n = 1;
        for (std::size_t e : shape) {
            if (e < 1) throw DimensionError("tensor extents must be >= 1, got shape " + shape_string(shape));
            n *= e;
        }
        return n;
    }

    std::vector<std::size_t> shape_;
    std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace cacnet

#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "uatlab/errors.hpp"

namespace uatlab {

std::string shape_to_string(const std::vector<std::size_t>& shape);

// Dense row-major tensor of 64-bit floats. The gradient buffer is metadata
// rather than logical value, so it is mutable: forward passes over const
// parameters may still receive gradient accumulation from a later backward.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(checked_size(shape_), 0.0) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != checked_size(shape_)) {
            throw DimensionError("Tensor: data length " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_to_string(shape_));
        }
    }

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<std::size_t> shape, double value) {
        Tensor t(std::move(shape));
        for (double& v : t.data_) {
            v = value;
        }
        return t;
    }

    static Tensor scalar(double value) { return Tensor({1}, {value}); }

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

    // Rank-2 convenience: rows/cols of a matrix (rank-1 counts as one row).
    std::size_t rows() const { return rank() == 2 ? shape_[0] : 1; }
    std::size_t cols() const { return rank() == 2 ? shape_[1] : size(); }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::vector<double>& values() noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    double& at(std::size_t i) { return data_.at(i); }
    double at(std::size_t i) const { return data_.at(i); }
    double& at(std::size_t i, std::size_t j) { return data_.at(i * cols() + j); }
    double at(std::size_t i, std::size_t j) const { return data_.at(i * cols() + j); }

    bool requires_grad() const noexcept { return requires_grad_; }
    void set_requires_grad(bool flag) noexcept { requires_grad_ = flag; }

    bool has_grad() const noexcept { return !grad_.empty(); }

    std::vector<double>& grad() const {
        if (grad_.empty()) {
            throw ContractError("Tensor::grad: no gradient buffer (run backward first)");
        }
        return grad_;
    }

    // Allocates a zeroed gradient buffer if absent.
    std::vector<double>& ensure_grad() const {
        if (grad_.empty()) {
            grad_.assign(data_.size(), 0.0);
        }
        return grad_;
    }

    void zero_grad() const {
        if (!grad_.empty()) {
            grad_.assign(grad_.size(), 0.0);
        }
    }

    void drop_grad() const { grad_.clear(); }

    bool all_finite() const noexcept {
        for (double v : data_) {
            if (!std::isfinite(v)) {
                return false;
            }
        }
        return true;
    }

private:
    static std::size_t checked_size(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t extent : shape) {
            if (extent == 0) {
                throw DimensionError("Tensor: zero extent in shape " + shape_to_string(shape));
            }
            n *= extent;
        }
        return n;
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
    bool requires_grad_ = false;
    mutable std::vector<double> grad_;
};

inline std::string shape_to_string(const std::vector<std::size_t>& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) {
            out += "x";
        }
        out += std::to_string(shape[i]);
    }
    out += "]";
    return out;
}

}  // namespace uatlab

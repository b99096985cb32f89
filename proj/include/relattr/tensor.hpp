#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

namespace relattr {

/// Dense row-major tensor of doubles, rank 1-3.
class Tensor {
  public:
    Tensor() = default;

    explicit Tensor(std::vector<std::int64_t> shape)
        : shape_(std::move(shape)), data_(checked_numel(shape_), 0.0) {}

    Tensor(std::vector<std::int64_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (static_cast<std::int64_t>(data_.size()) != checked_numel(shape_)) {
            throw std::invalid_argument("Tensor: data length does not match shape");
        }
    }

    static Tensor zeros(std::vector<std::int64_t> shape) { return Tensor(std::move(shape)); }

    const std::vector<std::int64_t>& shape() const { return shape_; }
    std::int64_t rank() const { return static_cast<std::int64_t>(shape_.size()); }
    std::int64_t dim(std::size_t i) const { return shape_[i]; }
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    // rank-2 access, row-major
    double& at(std::int64_t i, std::int64_t j) { return data_[static_cast<std::size_t>(i * shape_[1] + j)]; }
    double at(std::int64_t i, std::int64_t j) const { return data_[static_cast<std::size_t>(i * shape_[1] + j)]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    bool all_finite() const {
        for (double v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    double sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

    double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

  private:
    static std::int64_t checked_numel(const std::vector<std::int64_t>& shape) {
        if (shape.empty() || shape.size() > 3) {
            throw std::invalid_argument("Tensor: rank must be 1-3");
        }
        std::int64_t n = 1;
        for (std::int64_t d : shape) {
            if (d <= 0) throw std::invalid_argument("Tensor: dimensions must be positive");
            n *= d;
        }
        return n;
    }

    std::vector<std::int64_t> shape_;
    std::vector<double> data_;
};

}  // namespace relattr

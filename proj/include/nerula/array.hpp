#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nerula {

using Shape = std::vector<std::size_t>;

/// Raised when operand shapes are incompatible. The message carries both shapes.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

std::string to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Dense row-major array of doubles.
class Array {
public:
    Array() = default;
    explicit Array(Shape shape, double fill = 0.0);
    Array(Shape shape, std::vector<double> data);

    static Array scalar(double v) { return Array({1}, {v}); }
    static Array vector(std::vector<double> v);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::vector<double>& values() noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    const double& operator[](std::size_t i) const noexcept { return data_[i]; }

    // 2-D element access, row-major.
    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * shape_[1] + c]; }
    const double& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * shape_[1] + c]; }

    double item() const;
    Array reshaped(Shape shape) const;
    void fill(double v);
    bool all_finite() const noexcept;

    friend bool operator==(const Array&, const Array&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

}  // namespace nerula

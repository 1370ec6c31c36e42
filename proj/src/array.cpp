#include "nerula/array.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace nerula {

std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) {
            os << " x ";
        }
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) {
        n *= d;
    }
    return n;
}

namespace {
void check_shape(const Shape& shape) {
    if (shape.empty()) {
        throw ShapeError("array shape must have at least one axis");
    }
    for (auto d : shape) {
        if (d == 0) {
            throw ShapeError("array shape " + to_string(shape) + " has a zero extent");
        }
    }
}
}  // namespace

Array::Array(Shape shape, double fill) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_.assign(shape_size(shape_), fill);
}

Array::Array(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    if (shape_size(shape_) != data_.size()) {
        throw ShapeError("shape " + to_string(shape_) + " needs " + std::to_string(shape_size(shape_)) +
                         " elements, got " + std::to_string(data_.size()));
    }
}

Array Array::vector(std::vector<double> v) {
    const auto n = v.size();
    return Array({n}, std::move(v));
}

double Array::item() const {
    if (data_.size() != 1) {
        throw ShapeError("item() on array of shape " + to_string(shape_));
    }
    return data_[0];
}

Array Array::reshaped(Shape shape) const {
    if (shape_size(shape) != data_.size()) {
        throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
    }
    return Array(std::move(shape), data_);
}

void Array::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Array::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace nerula

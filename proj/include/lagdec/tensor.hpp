#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lagdec/errors.hpp"

namespace lagdec {

using Vec = std::vector<double>;

inline std::string shape_string(const std::vector<std::size_t>& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

inline std::size_t shape_volume(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

/// Dense row-major array of doubles.
class Tensor {
public:
    Tensor() = default;

    Tensor(std::vector<std::size_t> shape, Vec data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (shape_volume(shape_) != data_.size()) {
            throw ShapeError("tensor shape " + shape_string(shape_) + " does not match " +
                             std::to_string(data_.size()) + " values");
        }
        for (double v : data_) {
            if (!std::isfinite(v)) throw std::invalid_argument("tensor values must be finite");
        }
    }

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(shape_volume(shape_), 0.0) {}

    static Tensor vector(Vec data) {
        const std::size_t n = data.size();
        return Tensor({n}, std::move(data));
    }

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<const double> values() const noexcept { return data_; }
    std::span<double> values() noexcept { return data_; }
    const Vec& data() const noexcept { return data_; }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    bool operator==(const Tensor&) const = default;

private:
    std::vector<std::size_t> shape_;
    Vec data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double squared_norm(std::span<const double> a) { return dot(a, a); }

inline Vec subtract(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("subtract: length mismatch");
    Vec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

inline Vec negated(std::span<const double> a) {
    Vec out(a.begin(), a.end());
    for (double& v : out) v = -v;
    return out;
}

inline double positive_part(double x) { return x > 0.0 ? x : 0.0; }
inline double negative_part(double x) { return x < 0.0 ? x : 0.0; }

}  // namespace lagdec

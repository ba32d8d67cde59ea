#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "pendiag/errors.hpp"

namespace pendiag {

// Dense row-major array with an explicit shape. Double precision throughout:
// the training loop and the finite-difference checks share one numeric type,
// which keeps runs reproducible bitwise in single-threaded mode.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> s)
        : shape(std::move(s)), data(count(shape), 0.0) {}

    Tensor(std::vector<std::size_t> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != count(shape)) {
            throw ConfigError("tensor data length does not match shape");
        }
    }

    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return s.empty() ? 0 : n;
    }

    std::size_t size() const { return data.size(); }

    std::size_t dim(std::size_t i) const { return shape.at(i); }

    std::size_t dims() const { return shape.size(); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    // 2-D access, shape [rows, cols]
    double& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

    // 3-D access, shape [a, b, c]
    double& at(std::size_t i, std::size_t j, std::size_t k) {
        return data[(i * shape[1] + j) * shape[2] + k];
    }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return data[(i * shape[1] + j) * shape[2] + k];
    }

    bool all_finite() const {
        for (double v : data) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

inline bool same_shape(const Tensor& a, const Tensor& b) {
    return a.shape == b.shape;
}

} // namespace pendiag

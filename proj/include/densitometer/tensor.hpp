#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "densitometer/rng.hpp"

namespace densitometer {

// Shape-tagged flat array in row-major order. Real is float throughout the
// pipeline; a double instantiation exists for high-precision gradient checks.
template <class Real>
struct TensorT {
    std::vector<int> shape;
    std::vector<Real> data;

    TensorT() = default;

    explicit TensorT(std::vector<int> s, Real fill = Real(0)) : shape(std::move(s)) {
        data.assign(static_cast<std::size_t>(numel_of(shape)), fill);
    }

    TensorT(std::vector<int> s, std::vector<Real> d) : shape(std::move(s)), data(std::move(d)) {
        if (numel_of(shape) != static_cast<std::int64_t>(data.size())) {
            throw std::invalid_argument("Tensor: shape " + shape_string(shape) + " implies " +
                                        std::to_string(numel_of(shape)) + " elements, got " +
                                        std::to_string(data.size()));
        }
    }

    static std::int64_t numel_of(const std::vector<int>& s) {
        std::int64_t n = 1;
        for (const int d : s) {
            if (d <= 0) {
                throw std::invalid_argument("Tensor: nonpositive dimension in shape " + shape_string(s));
            }
            n *= d;
        }
        return n;
    }

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }

    Real& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
    Real operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

    // 2-d accessors (row-major)
    Real& at(int r, int c) { return data[static_cast<std::size_t>(r) * shape[1] + c]; }
    Real at(int r, int c) const { return data[static_cast<std::size_t>(r) * shape[1] + c]; }

    bool same_shape(const TensorT& other) const { return shape == other.shape; }

    bool all_finite() const {
        for (const Real v : data) {
            if (!std::isfinite(static_cast<double>(v))) {
                return false;
            }
        }
        return true;
    }

    void fill(Real v) { std::fill(data.begin(), data.end(), v); }

    static std::string shape_string(const std::vector<int>& s) {
        std::string out = "(";
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i) {
                out += ",";
            }
            out += std::to_string(s[i]);
        }
        out += ")";
        return out;
    }

    std::string shape_string() const { return shape_string(shape); }
};

using Tensor = TensorT<float>;

// Tensor filled with uniform draws from [low, high); deterministic per stream key.
template <class Real>
TensorT<Real> rng_uniform(RngStream& stream, double low, double high, std::vector<int> shape) {
    if (!(low < high)) {
        throw std::invalid_argument("rng_uniform: low must be < high");
    }
    TensorT<Real> t(std::move(shape));
    for (auto& v : t.data) {
        v = static_cast<Real>(low + stream.next_double() * (high - low));
    }
    return t;
}

inline Tensor rng_uniform(RngStream& stream, double low, double high, std::vector<int> shape) {
    return rng_uniform<float>(stream, low, high, std::move(shape));
}

}  // namespace densitometer

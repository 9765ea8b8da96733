#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "smbop/common.hpp"

namespace smbop::nn {

/// Dense row-major 64-bit float tensor. Rank 1 or 2 everywhere in this
/// project; shape is kept generic for the checkpoint format.
struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::int64_t> s) : shape(std::move(s)) {
        data.assign(static_cast<std::size_t>(numel_of(shape)), 0.0);
    }

    static std::int64_t numel_of(const std::vector<std::int64_t>& s) {
        std::int64_t n = 1;
        for (auto d : s) n *= d;
        return n;
    }

    static Tensor zeros(std::vector<std::int64_t> s) { return Tensor(std::move(s)); }

    static Tensor uniform(std::vector<std::int64_t> s, double lo, double hi, Rng& rng) {
        Tensor t(std::move(s));
        for (auto& v : t.data) v = rng.uniform(lo, hi);
        return t;
    }

    static Tensor full(std::vector<std::int64_t> s, double v) {
        Tensor t(std::move(s));
        for (auto& x : t.data) x = v;
        return t;
    }

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    std::int64_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::int64_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

    double& at(std::int64_t r, std::int64_t c) {
        return data[static_cast<std::size_t>(r * cols() + c)];
    }
    double at(std::int64_t r, std::int64_t c) const {
        return data[static_cast<std::size_t>(r * cols() + c)];
    }
    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    double* row(std::int64_t r) { return data.data() + r * cols(); }
    const double* row(std::int64_t r) const { return data.data() + r * cols(); }

    void zero() { std::fill(data.begin(), data.end(), 0.0); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

using Vec = std::vector<double>;

inline void axpy(double a, const Vec& x, Vec& y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

}  // namespace smbop::nn

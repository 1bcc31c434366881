#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "d2v/util.hpp"

namespace d2v {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. Sized once, then indexed.
struct Matrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(size_t r, size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(size_t r, size_t c) { return data[r * cols + c]; }
    double operator()(size_t r, size_t c) const { return data[r * cols + c]; }

    const double* row(size_t r) const { return data.data() + r * cols; }
    double* row(size_t r) { return data.data() + r * cols; }

    size_t size() const { return data.size(); }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

// y = M x
inline void matvec_into(const Matrix& m, const double* x, double* y) {
    const double* row = m.data.data();
    for (size_t i = 0; i < m.rows; ++i, row += m.cols) {
        double acc = 0.0;
        for (size_t j = 0; j < m.cols; ++j) acc += row[j] * x[j];
        y[i] = acc;
    }
}

inline Vec matvec(const Matrix& m, const Vec& x) {
    if (x.size() != m.cols) throw NumericError("matvec: dimension mismatch");
    Vec y(m.rows);
    matvec_into(m, x.data(), y.data());
    return y;
}

// y += M x
inline void matvec_add(const Matrix& m, const double* x, double* y) {
    const double* row = m.data.data();
    for (size_t i = 0; i < m.rows; ++i, row += m.cols) {
        double acc = 0.0;
        for (size_t j = 0; j < m.cols; ++j) acc += row[j] * x[j];
        y[i] += acc;
    }
}

// y += M^T x
inline void matvec_t_add(const Matrix& m, const double* x, double* y) {
    const double* row = m.data.data();
    for (size_t i = 0; i < m.rows; ++i, row += m.cols) {
        const double xi = x[i];
        for (size_t j = 0; j < m.cols; ++j) y[j] += row[j] * xi;
    }
}

// G += a b^T
inline void outer_add(Matrix& g, const double* a, const double* b) {
    double* row = g.data.data();
    for (size_t i = 0; i < g.rows; ++i, row += g.cols) {
        const double ai = a[i];
        for (size_t j = 0; j < g.cols; ++j) row[j] += ai * b[j];
    }
}

inline bool all_finite(const double* p, size_t n) {
    for (size_t i = 0; i < n; ++i)
        if (!std::isfinite(p[i])) return false;
    return true;
}

inline bool all_finite(const Vec& v) { return all_finite(v.data(), v.size()); }
inline bool all_finite(const Matrix& m) { return all_finite(m.data.data(), m.size()); }

inline void require_finite(const Vec& v, const std::string& what) {
    if (!all_finite(v)) throw NumericError(what + ": non-finite values");
}

// Glorot-style uniform init in +-sqrt(6/(fan_in+fan_out)).
inline void init_uniform(Matrix& m, size_t fan_in, size_t fan_out, std::mt19937_64& rng) {
    const double a = std::sqrt(6.0 / double(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-a, a);
    for (auto& v : m.data) v = dist(rng);
}

}  // namespace d2v

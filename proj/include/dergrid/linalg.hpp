#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dergrid/errors.hpp"

namespace dergrid {

using Vec = std::vector<double>;

// Dense row-major matrix. All matrices in this project are small (at most
// N x N for the feeder's N nodes), so no sparse storage is needed.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    // y = M x
    Vec apply(const Vec& x) const {
        if (x.size() != cols)
            throw DimensionError("matrix apply: expected vector of length " +
                                 std::to_string(cols) + ", got " + std::to_string(x.size()));
        Vec y(rows, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
            double acc = 0.0;
            const double* row = data.data() + r * cols;
            for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
            y[r] = acc;
        }
        return y;
    }
};

inline double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

// Solves A x = b in place by Gaussian elimination with partial pivoting.
// A is overwritten. Throws DivergenceError on a (numerically) singular pivot.
inline Vec solve_dense(Matrix A, Vec b) {
    const std::size_t n = A.rows;
    if (A.cols != n || b.size() != n) throw DimensionError("solve_dense: shape mismatch");
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        double best = std::abs(A(k, k));
        for (std::size_t r = k + 1; r < n; ++r) {
            if (std::abs(A(r, k)) > best) { best = std::abs(A(r, k)); piv = r; }
        }
        if (best < 1e-14) throw DivergenceError("solve_dense: singular matrix");
        if (piv != k) {
            for (std::size_t c = 0; c < n; ++c) std::swap(A(k, c), A(piv, c));
            std::swap(b[k], b[piv]);
        }
        for (std::size_t r = k + 1; r < n; ++r) {
            const double m = A(r, k) / A(k, k);
            if (m == 0.0) continue;
            for (std::size_t c = k; c < n; ++c) A(r, c) -= m * A(k, c);
            b[r] -= m * b[k];
        }
    }
    Vec x(n, 0.0);
    for (std::size_t r = n; r-- > 0;) {
        double acc = b[r];
        for (std::size_t c = r + 1; c < n; ++c) acc -= A(r, c) * x[c];
        x[r] = acc / A(r, r);
    }
    return x;
}

} // namespace dergrid

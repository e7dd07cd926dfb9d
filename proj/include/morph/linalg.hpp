#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "morph/errors.hpp"

namespace morph::la {

/// Dense row-major matrix, just big enough for the small design/covariance
/// systems in this project (p <= a few dozen).
struct Mat {
    std::size_t rows = 0, cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    Mat transposed() const {
        Mat t(cols, rows);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
        return t;
    }
};

inline Mat mul(const Mat& A, const Mat& B) {
    if (A.cols != B.rows) throw DimensionMismatch("matrix product shape mismatch");
    Mat C(A.rows, B.cols);
    for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t k = 0; k < A.cols; ++k) {
            const double v = A(i, k);
            if (v == 0.0) continue;
            for (std::size_t j = 0; j < B.cols; ++j) C(i, j) += v * B(k, j);
        }
    return C;
}

/// In-place lower Cholesky factor; returns false when the matrix is not
/// numerically positive definite.
inline bool cholesky(Mat& A) {
    const std::size_t n = A.rows;
    for (std::size_t j = 0; j < n; ++j) {
        double d = A(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= A(j, k) * A(j, k);
        if (!(d > 0.0) || !std::isfinite(d)) return false;
        const double l = std::sqrt(d);
        A(j, j) = l;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = A(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= A(i, k) * A(j, k);
            A(i, j) = s / l;
        }
        for (std::size_t k = j + 1; k < n; ++k) A(j, k) = 0.0;
    }
    return true;
}

/// Solve L L^T x = b given the lower Cholesky factor.
inline std::vector<double> chol_solve(const Mat& L, std::vector<double> b) {
    const std::size_t n = L.rows;
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= L(i, k) * b[k];
        b[i] = s / L(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= L(k, i) * b[k];
        b[i] = s / L(i, i);
    }
    return b;
}

/// Inverse of a symmetric positive definite matrix through its Cholesky
/// factor; throws NumericalError when not PD.
inline Mat inverse_spd(Mat A) {
    const std::size_t n = A.rows;
    if (!cholesky(A)) throw NumericalError("matrix not positive definite");
    Mat inv(n, n);
    std::vector<double> e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        e.assign(n, 0.0);
        e[j] = 1.0;
        const auto x = chol_solve(A, e);
        for (std::size_t i = 0; i < n; ++i) inv(i, j) = x[i];
    }
    return inv;
}

/// log determinant of an SPD matrix (via Cholesky); throws when not PD.
inline double logdet_spd(Mat A) {
    if (!cholesky(A)) throw NumericalError("matrix not positive definite");
    double s = 0.0;
    for (std::size_t i = 0; i < A.rows; ++i) s += std::log(A(i, i));
    return 2.0 * s;
}

/// Solve a general square system by LU with partial pivoting.
inline std::vector<double> lu_solve(Mat A, std::vector<double> b) {
    const std::size_t n = A.rows;
    std::vector<std::size_t> piv(n);
    for (std::size_t i = 0; i < n; ++i) piv[i] = i;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::fabs(A(i, k)) > std::fabs(A(p, k))) p = i;
        if (A(p, k) == 0.0) throw NumericalError("singular matrix in lu_solve");
        if (p != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(A(p, j), A(k, j));
            std::swap(b[p], b[k]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = A(i, k) / A(k, k);
            A(i, k) = f;
            for (std::size_t j = k + 1; j < n; ++j) A(i, j) -= f * A(k, j);
            b[i] -= f * b[k];
        }
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= A(i, j) * b[j];
        b[i] = s / A(i, i);
    }
    return b;
}

} // namespace morph::la

#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "distributions.hpp"
#include "rng.hpp"

namespace bltqr {

// Small dense SPD helpers for the conjugate block updates. Matrices are
// row-major n x n; only the lower triangle of the factor is referenced.

inline void cholesky_in_place(std::vector<double>& a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) sum -= a[i * n + k] * a[j * n + k];
            if (i == j) {
                if (!(sum > 0.0)) throw std::runtime_error("cholesky: matrix not positive definite");
                a[i * n + i] = std::sqrt(sum);
            } else {
                a[i * n + j] = sum / a[j * n + j];
            }
        }
    }
}

inline void solve_lower(const std::vector<double>& l, std::size_t n, std::vector<double>& x) {
    for (std::size_t i = 0; i < n; ++i) {
        double sum = x[i];
        for (std::size_t k = 0; k < i; ++k) sum -= l[i * n + k] * x[k];
        x[i] = sum / l[i * n + i];
    }
}

inline void solve_lower_transposed(const std::vector<double>& l, std::size_t n,
                                   std::vector<double>& x) {
    for (std::size_t i = n; i-- > 0;) {
        double sum = x[i];
        for (std::size_t k = i + 1; k < n; ++k) sum -= l[k * n + i] * x[k];
        x[i] = sum / l[i * n + i];
    }
}

/// Draw from N(P^-1 b, P^-1) given the precision matrix P (consumed) and the
/// linear term b. With P = L L^T the draw is P^-1 b + L^-T z, z ~ N(0, I).
inline std::vector<double> sample_gaussian_precision(std::vector<double> precision,
                                                     std::vector<double> rhs, std::size_t n,
                                                     RngStream& rng) {
    cholesky_in_place(precision, n);
    solve_lower(precision, n, rhs);
    solve_lower_transposed(precision, n, rhs); // rhs now holds the mean
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = sample_normal(0.0, 1.0, rng);
    solve_lower_transposed(precision, n, z);
    for (std::size_t i = 0; i < n; ++i) rhs[i] += z[i];
    return rhs;
}

/// Mean and covariance of N(P^-1 b, P^-1); used by diagnostics and tests.
inline void gaussian_precision_moments(std::vector<double> precision, std::vector<double> rhs,
                                       std::size_t n, std::vector<double>& mean,
                                       std::vector<double>& cov) {
    cholesky_in_place(precision, n);
    mean = rhs;
    solve_lower(precision, n, mean);
    solve_lower_transposed(precision, n, mean);
    cov.assign(n * n, 0.0);
    std::vector<double> e(n);
    for (std::size_t j = 0; j < n; ++j) {
        e.assign(n, 0.0);
        e[j] = 1.0;
        solve_lower(precision, n, e);
        solve_lower_transposed(precision, n, e);
        for (std::size_t i = 0; i < n; ++i) cov[i * n + j] = e[i];
    }
}

} // namespace bltqr

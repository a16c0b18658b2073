// Independent recomputation oracles used by the test suites. Everything
// here is deliberately written by a different route than the library code
// (index loops, Jacobi rotations, bisection) so agreement is meaningful.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "sharplab/matrix.hpp"

namespace oracles {

using sharplab::Matrix;
using sharplab::Vector;

/// Kronecker product by the entrywise definition, one index at a time.
inline Matrix kron_oracle(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            for (std::size_t p = 0; p < b.rows(); ++p)
                for (std::size_t q = 0; q < b.cols(); ++q)
                    out(i * b.rows() + p, j * b.cols() + q) = a(i, j) * b(p, q);
    return out;
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// descending.
inline std::vector<double> jacobi_eigenvalues(Matrix a, double tol = 1e-13,
                                              std::size_t sweeps = 100) {
    const std::size_t n = a.rows();
    if (n != a.cols()) throw std::invalid_argument("jacobi: square matrices only");
    for (std::size_t sweep = 0; sweep < sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        if (off < tol * tol) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
    }
    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
    std::sort(eig.begin(), eig.end(), std::greater<>());
    return eig;
}

/// Largest singular value from the Jacobi eigenvalues of a^T a.
inline double spectral_norm_oracle(const Matrix& a) {
    const Matrix ata = a.transpose() * a;
    const auto eig = jacobi_eigenvalues(ata);
    return std::sqrt(std::max(0.0, eig.front()));
}

inline double min_eigenvalue(const Matrix& symmetric) {
    return jacobi_eigenvalues(symmetric).back();
}

/// Unique positive root of a*x^3 + b*x^2 + c*x - eps = 0 (monotone on x>0)
/// by plain bisection.
inline double bisect_root(double a, double b, double c, double eps, std::size_t iters = 200) {
    auto f = [&](double x) { return ((a * x + b) * x + c) * x - eps; };
    double hi = 1.0;
    while (f(hi) < 0.0) hi *= 2.0;
    double lo = 0.0;
    for (std::size_t i = 0; i < iters; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Uniform point in the strict interior of the probability simplex.
inline Vector random_simplex(sharplab::SeededRng& rng, std::size_t k, double floor = 1e-3) {
    Vector p(k);
    double sum = 0.0;
    for (auto& v : p) {
        v = floor - std::log(std::max(rng.uniform(), 1e-300));
        sum += v;
    }
    for (auto& v : p) v /= sum;
    return p;
}

inline Matrix random_matrix(sharplab::SeededRng& rng, std::size_t rows, std::size_t cols,
                            double scale = 1.0) {
    Matrix m(rows, cols);
    for (auto& v : m.data()) v = scale * rng.normal();
    return m;
}

inline double rel_err(const Matrix& got, const Matrix& want) {
    const double scale = std::max(1e-12, want.max_abs());
    return (got - want).max_abs() / scale;
}

}  // namespace oracles

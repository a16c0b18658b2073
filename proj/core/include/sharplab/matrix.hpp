#pragma once

#include <cstddef>
#include <vector>

#include "sharplab/rng.hpp"

namespace sharplab {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles. Desk-scale only: everything is a
/// plain value with no views or sparsity.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, Vector data);

    static Matrix identity(std::size_t n);
    /// Column vector (n x 1) from a Vector.
    static Matrix column(const Vector& v);
    /// Outer product v * v^T.
    static Matrix outer(const Vector& v);
    static Matrix outer(const Vector& a, const Vector& b);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    const Vector& data() const { return data_; }
    Vector& data() { return data_; }

    Matrix transpose() const;
    Matrix operator*(const Matrix& rhs) const;
    Vector operator*(const Vector& v) const;
    Matrix operator+(const Matrix& rhs) const;
    Matrix operator-(const Matrix& rhs) const;
    Matrix operator*(double s) const;

    double trace() const;
    double frobenius_norm() const;
    double max_abs() const;
    bool all_finite() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    Vector data_;
};

/// Result dimension cap for kron; exceeding it signals a misuse at desk scale.
inline constexpr std::size_t kKronDimCap = 4096;

/// Kronecker product: block (i,j) of the result equals a(i,j) * b.
Matrix kron(const Matrix& a, const Matrix& b);

/// Largest singular value via power iteration on a^T a. Throws on
/// non-convergence, reporting the last iterate and residual.
double spectral_norm(const Matrix& a, double tol, std::size_t max_iter, SeededRng rng);
double spectral_norm(const Matrix& a);  // default tol 1e-10, 10000 iters, fixed seed

double dot(const Vector& a, const Vector& b);
double norm2(const Vector& v);
double norm_inf(const Vector& v);

}  // namespace sharplab

#include "sharplab/matrix.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sharplab {

// ---------------------------------------------------------------------------
// SeededRng
// ---------------------------------------------------------------------------

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

SeededRng::SeededRng(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
    std::uint64_t state = seed ^ (0x6a09e667f3bcc909ULL + stream_id * 0x9e3779b97f4a7c15ULL);
    for (auto& s : s_) s = splitmix64(state);
}

SeededRng SeededRng::derive(std::uint64_t substream) const {
    std::uint64_t state = seed_ ^ rotl(stream_id_ + 0x243f6a8885a308d3ULL, 17);
    std::uint64_t mixed = splitmix64(state) ^ substream;
    return SeededRng(seed_, splitmix64(mixed));
}

std::uint64_t SeededRng::next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double SeededRng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double SeededRng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double SeededRng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    const double two_pi = 6.283185307179586476925286766559;
    spare_ = mag * std::sin(two_pi * u2);
    has_spare_ = true;
    return mag * std::cos(two_pi * u2);
}

std::uint64_t SeededRng::uniform_int(std::uint64_t n) {
    // rejection sampling to avoid modulo bias
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

double SeededRng::rademacher() { return (next_u64() & 1ULL) ? 1.0 : -1.0; }

// ---------------------------------------------------------------------------
// Matrix
// ---------------------------------------------------------------------------

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, Vector data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
        throw std::invalid_argument("Matrix: data length does not match rows*cols");
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::column(const Vector& v) {
    Matrix m(v.size(), 1);
    m.data() = v;
    return m;
}

Matrix Matrix::outer(const Vector& v) { return outer(v, v); }

Matrix Matrix::outer(const Vector& a, const Vector& b) {
    Matrix m(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) m(i, j) = a[i] * b[j];
    return m;
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

Matrix Matrix::operator*(const Matrix& rhs) const {
    if (cols_ != rhs.rows_) throw std::invalid_argument("Matrix multiply: shape mismatch");
    Matrix out(rows_, rhs.cols_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t k = 0; k < cols_; ++k) {
            const double a = (*this)(i, k);
            if (a == 0.0) continue;
            for (std::size_t j = 0; j < rhs.cols_; ++j) out(i, j) += a * rhs(k, j);
        }
    return out;
}

Vector Matrix::operator*(const Vector& v) const {
    if (cols_ != v.size()) throw std::invalid_argument("Matrix-vector multiply: shape mismatch");
    Vector out(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < cols_; ++j) acc += (*this)(i, j) * v[j];
        out[i] = acc;
    }
    return out;
}

Matrix Matrix::operator+(const Matrix& rhs) const {
    if (rows_ != rhs.rows_ || cols_ != rhs.cols_)
        throw std::invalid_argument("Matrix add: shape mismatch");
    Matrix out = *this;
    for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] += rhs.data_[i];
    return out;
}

Matrix Matrix::operator-(const Matrix& rhs) const {
    if (rows_ != rhs.rows_ || cols_ != rhs.cols_)
        throw std::invalid_argument("Matrix subtract: shape mismatch");
    Matrix out = *this;
    for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] -= rhs.data_[i];
    return out;
}

Matrix Matrix::operator*(double s) const {
    Matrix out = *this;
    for (auto& v : out.data_) v *= s;
    return out;
}

double Matrix::trace() const {
    double t = 0.0;
    const std::size_t n = rows_ < cols_ ? rows_ : cols_;
    for (std::size_t i = 0; i < n; ++i) t += (*this)(i, i);
    return t;
}

double Matrix::frobenius_norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
}

double Matrix::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::fabs(v));
    return m;
}

bool Matrix::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

Matrix kron(const Matrix& a, const Matrix& b) {
    if (!a.all_finite() || !b.all_finite())
        throw std::invalid_argument("kron: non-finite operand");
    const std::size_t rr = a.rows() * b.rows();
    const std::size_t rc = a.cols() * b.cols();
    if (rr > kKronDimCap || rc > kKronDimCap) {
        std::ostringstream os;
        os << "kron: result " << rr << "x" << rc << " exceeds the size cap " << kKronDimCap;
        throw std::invalid_argument(os.str());
    }
    Matrix out(rr, rc);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) {
            const double aij = a(i, j);
            if (aij == 0.0) continue;
            for (std::size_t p = 0; p < b.rows(); ++p)
                for (std::size_t q = 0; q < b.cols(); ++q)
                    out(i * b.rows() + p, j * b.cols() + q) = aij * b(p, q);
        }
    return out;
}

double spectral_norm(const Matrix& a, double tol, std::size_t max_iter, SeededRng rng) {
    if (a.frobenius_norm() == 0.0)
        throw std::invalid_argument("spectral_norm: zero matrix");
    Vector v(a.cols());
    for (auto& x : v) x = rng.normal();
    double nv = norm2(v);
    for (auto& x : v) x /= nv;
    const Matrix at = a.transpose();
    double lambda = 0.0;
    for (std::size_t it = 0; it < max_iter; ++it) {
        Vector av = a * v;
        Vector w = at * av;
        const double nw = norm2(w);
        if (nw == 0.0) {
            // v landed in the null space; restart from a fresh direction
            for (auto& x : v) x = rng.normal();
            const double nn = norm2(v);
            for (auto& x : v) x /= nn;
            continue;
        }
        const double new_lambda = nw;  // Rayleigh quotient for unit v: ||A^T A v||
        for (std::size_t i = 0; i < w.size(); ++i) v[i] = w[i] / nw;
        if (it > 0 && std::fabs(new_lambda - lambda) <= tol * std::max(1.0, new_lambda)) {
            return std::sqrt(new_lambda);
        }
        lambda = new_lambda;
    }
    std::ostringstream os;
    os << "spectral_norm: no convergence after " << max_iter
       << " iterations; last estimate " << std::sqrt(lambda) << ", residual "
       << tol;
    throw std::runtime_error(os.str());
}

double spectral_norm(const Matrix& a) {
    return spectral_norm(a, 1e-12, 100000, SeededRng(0x5eed, 0));
}

double dot(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const Vector& v) { return std::sqrt(dot(v, v)); }

double norm_inf(const Vector& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

}  // namespace sharplab

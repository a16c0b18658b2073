#include "sharplab/cubic.hpp"

#include <cmath>
#include <stdexcept>

namespace sharplab {

namespace {

double eval(double a, double b, double x) { return (a * x + b) * x * x; }

double newton_polish(double a, double b, double eps, double x) {
    // one polish step, then extra steps only while the residual is above the
    // contract tolerance
    const double tol = 1e-9 * std::max(1.0, eps);
    for (int i = 0; i < 8; ++i) {
        const double f = eval(a, b, x) - eps;
        if (i > 0 && std::fabs(f) < tol) break;
        const double df = 3.0 * a * x * x + 2.0 * b * x;
        if (df <= 0.0) break;
        const double next = x - f / df;
        if (next > 0.0) x = next;
    }
    return x;
}

}  // namespace

void CubicProblem::validate() const {
    if (!(cubic_coeff > 0.0)) throw std::invalid_argument("CubicProblem: a must be positive");
    if (!(quad_coeff >= 0.0)) throw std::invalid_argument("CubicProblem: b must be nonnegative");
    if (!(target > 0.0)) throw std::invalid_argument("CubicProblem: eps must be positive");
}

CubicRoot unique_positive_cubic_root(const CubicProblem& p) {
    p.validate();
    const double a = p.cubic_coeff;
    const double b = p.quad_coeff;
    const double eps = p.target;

    // Normalize to x^3 + alpha x^2 - beta = 0, depress with x = t - alpha/3.
    const double alpha = b / a;
    const double beta = eps / a;
    const double pp = -alpha * alpha / 3.0;
    const double qq = 2.0 * alpha * alpha * alpha / 27.0 - beta;
    const double disc = qq * qq / 4.0 + pp * pp * pp / 27.0;

    double x;
    std::string branch;
    if (disc >= 0.0) {
        branch = "cardano";
        const double s = std::sqrt(disc);
        x = std::cbrt(-qq / 2.0 + s) + std::cbrt(-qq / 2.0 - s) - alpha / 3.0;
    } else {
        branch = "trigonometric";
        // three real roots; the unique positive one is the largest
        const double rad = std::sqrt(-pp / 3.0);
        const double arg = 3.0 * qq / (2.0 * pp * rad);
        const double clamped = std::max(-1.0, std::min(1.0, arg));
        const double theta = std::acos(clamped) / 3.0;
        x = 2.0 * rad * std::cos(theta) - alpha / 3.0;
    }
    if (!(x > 0.0)) {
        // severe cancellation for extreme alpha; fall back to a safe bracket
        x = std::cbrt(beta);
    }
    x = newton_polish(a, b, eps, x);

    // guard: if polish could not reach the residual contract (extreme
    // coefficient ratios), finish with bisection on a sure bracket
    const double tol = 1e-9 * std::max(1.0, eps);
    if (std::fabs(eval(a, b, x) - eps) >= tol) {
        double lo = 0.0;
        double hi = std::max(std::cbrt(eps / a), b > 0.0 ? std::sqrt(eps / b) : 0.0) * 2.0 + 1.0;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            if (eval(a, b, mid) < eps)
                lo = mid;
            else
                hi = mid;
        }
        x = newton_polish(a, b, eps, 0.5 * (lo + hi));
    }

    CubicRoot out;
    out.root = x;
    out.residual = std::fabs(eval(a, b, x) - eps);
    out.branch = branch;
    return out;
}

double unique_positive_root_with_linear(double a, double b, double c, double eps) {
    if (!(a > 0.0) || b < 0.0 || c < 0.0 || !(eps > 0.0))
        throw std::invalid_argument("unique_positive_root_with_linear: bad coefficients");
    auto f = [&](double x) { return ((a * x + b) * x + c) * x - eps; };
    double hi = 1.0;
    while (f(hi) < 0.0) hi *= 2.0;
    double lo = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (f(mid) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    double x = 0.5 * (lo + hi);
    for (int i = 0; i < 4; ++i) {
        const double df = (3.0 * a * x + 2.0 * b) * x + c;
        if (df <= 0.0) break;
        x -= f(x) / df;
    }
    return x;
}

}  // namespace sharplab

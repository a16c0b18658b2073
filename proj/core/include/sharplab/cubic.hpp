#pragma once

#include <string>

namespace sharplab {

/// The root problem a*x^3 + b*x^2 = eps with a > 0, b >= 0, eps > 0.
/// The left side is strictly increasing on x > 0, so exactly one positive
/// root exists.
struct CubicProblem {
    double quad_coeff = 0.0;   ///< b, the kappa/2 term
    double cubic_coeff = 0.0;  ///< a, the k*m*L^3/24 term
    double target = 0.0;       ///< eps

    void validate() const;  ///< throws std::invalid_argument on bad inputs
};

struct CubicRoot {
    double root = 0.0;
    double residual = 0.0;        ///< |a*x^3 + b*x^2 - eps|
    std::string branch;           ///< "cardano" or "trigonometric"
};

/// Unique positive root of a*x^3 + b*x^2 - eps = 0, via the depressed-cubic
/// substitution: Cardano when the discriminant is positive, the
/// trigonometric branch otherwise, then a Newton polish step.
/// Residual guaranteed below 1e-9 * max(1, eps).
CubicRoot unique_positive_cubic_root(const CubicProblem& p);

/// Unique positive root of a*x^3 + b*x^2 + c*x - eps = 0 with a > 0,
/// b, c >= 0, eps > 0 (monotone left side). Used when a first-order term
/// has to be carried along; solved by bracketed Newton.
double unique_positive_root_with_linear(double a, double b, double c, double eps);

}  // namespace sharplab

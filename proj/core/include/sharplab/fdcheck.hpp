#pragma once

#include <cstddef>
#include <functional>

#include "sharplab/matrix.hpp"
#include "sharplab/network.hpp"

namespace sharplab {

/// Central-difference derivative checks. These only evaluate the loss
/// forward, so they are an independent route against the analytic
/// curvature formulas. Used by the `hessian-check` subcommand and the
/// test suites.

/// Cross-entropy loss as a function of a perturbed classifier matrix,
/// features fixed.
double classifier_loss(const Matrix& w, const Vector& phi, std::size_t label);

/// Hessian of the cross-entropy loss w.r.t. the row-major vectorized
/// classifier weights, by central differences of the loss (step h).
Matrix fd_classifier_hessian(const Matrix& w, const Vector& phi, std::size_t label, double h);

/// Gradient of the mean batch loss w.r.t. every weight entry of one layer.
Matrix fd_layer_gradient(const MlpNetwork& net, const SampleBatch& batch, std::size_t layer,
                         double h);

/// Hessian block of the per-sample loss w.r.t. the column-wise vectorized
/// weights of one layer (matches the hessian_backprop convention).
Matrix fd_weight_block_hessian(const MlpNetwork& net, const Vector& x, std::size_t label,
                               std::size_t layer, double h);

/// Central difference of the closed-form penultimate Hessian w.r.t. one
/// classifier weight entry; an oracle for the third-derivative tensor.
Matrix fd_hessian_derivative(const Matrix& w, const Vector& phi, std::size_t label,
                             std::size_t wj, std::size_t wi, double h);

struct FdCheckReport {
    double max_rel_err_classifier_hessian = 0.0;
    double max_rel_err_layer_gradients = 0.0;
    double max_rel_err_backprop_blocks = 0.0;
    double max_rel_err_third_derivative = 0.0;
    std::size_t skipped_near_kink = 0;
    bool pass = false;
};

/// Runs the full finite-difference oracle suite on fresh random nets.
FdCheckReport run_fd_check_suite(std::uint64_t seed);

}  // namespace sharplab

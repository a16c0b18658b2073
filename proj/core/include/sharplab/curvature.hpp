#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "sharplab/matrix.hpp"
#include "sharplab/network.hpp"

namespace sharplab {

// ---------------------------------------------------------------------------
// Closed-form penultimate curvature
// ---------------------------------------------------------------------------

/// diag(yhat) - yhat yhat^T: the logit-space Hessian of cross-entropy.
/// Symmetric PSD with zero row sums. Throws if yhat is not on the simplex.
Matrix logit_hessian(const Vector& yhat);

/// (diag(yhat) - yhat yhat^T) kron phi phi^T: the km x km Hessian of the
/// cross-entropy loss w.r.t. the row-major vectorized classifier weights.
Matrix penultimate_hessian(const Vector& yhat, const Vector& phi);

/// Trace of the penultimate Hessian without assembling it:
/// sum_j yhat_j (1 - yhat_j) * sum_i phi_i^2.
double penultimate_hessian_trace(const Vector& yhat, const Vector& phi);

enum class SharpnessVariant { spectral, frobenius };

struct SharpnessRecord {
    std::size_t sample_id = 0;
    double loss = 0.0;
    double confidence = 0.0;        // p_y
    double kappa_spectral = 0.0;    // ||w||_2 * tr H
    double kappa_frobenius = 0.0;   // ||w||_F^2 * tr H
};

struct SharpnessReport {
    std::vector<SharpnessRecord> per_sample;
    double mean_kappa_spectral = 0.0;
    double mean_kappa_frobenius = 0.0;
    double mean_loss = 0.0;
};

/// Per-sample relative sharpness by the closed form (no Hessian assembly);
/// batch values are means over samples.
SharpnessReport relative_sharpness(const MlpNetwork& net, const SampleBatch& batch);
SharpnessRecord sample_sharpness(const MlpNetwork& net, const Vector& x, std::size_t label,
                                 std::size_t sample_id, double w_spectral, double w_frob_sq);

// ---------------------------------------------------------------------------
// Third derivative
// ---------------------------------------------------------------------------

/// Dense rank-3 tensor over the row-major vectorized classifier weights,
/// index (j*m+a, l*m+b, o*m+c).
class Tensor3 {
public:
    Tensor3(std::size_t n) : n_(n), data_(n * n * n, 0.0) {}
    double& operator()(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * n_ + j) * n_ + k];
    }
    double operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * n_ + j) * n_ + k];
    }
    std::size_t dim() const { return n_; }
    double max_abs() const;

private:
    std::size_t n_;
    Vector data_;
};

/// Third derivative of the cross-entropy loss w.r.t. the vectorized
/// classifier weights. Capped at km <= 64.
Tensor3 third_derivative_tensor(const Vector& yhat, const Vector& phi);

// ---------------------------------------------------------------------------
// Hessian backpropagation
// ---------------------------------------------------------------------------

struct LayerCurvature {
    std::size_t layer = 0;
    Vector gradient;          // g^l, w.r.t. pre-activations
    Matrix activation_hessian;  // H^l
    Matrix weight_hessian;    // H_{W_l} = (x^{l-1} x^{l-1 T}) kron (D^l H^l D^l)
    std::vector<bool> relu_mask;  // D^l diagonal (all true for identity layers)
};

struct BackpropResult {
    std::vector<LayerCurvature> layers;  // index 0 = first layer
    bool near_kink = false;              // some |pre-activation| < kink_margin
};

inline constexpr double kKinkMargin = 1e-6;

/// Second-order backprop from the analytic logit Hessian:
/// g^{l-1} = W_l^T D^l g^l, H^{l-1} = W_l^T D^l H^l D^l W_l,
/// H_{W_l} = (x^{l-1} x^{l-1 T}) kron (D^l H^l D^l).
/// Note the weight blocks use the column-wise vec(W) convention; see
/// commute_kron_order to compare against penultimate_hessian (row-major vec).
BackpropResult hessian_backprop(const MlpNetwork& net, const Vector& x, std::size_t label,
                                double kink_margin = kKinkMargin);

/// Reindex a (p*q) x (p*q) matrix representing A kron B (A p x p, B q x q)
/// into the (q*p) x (q*p) layout of B kron A. Converts between the
/// column-wise and row-major vec(W) conventions for weight Hessian blocks.
Matrix commute_kron_order(const Matrix& h, std::size_t p, std::size_t q);

// ---------------------------------------------------------------------------
// Hutchinson trace estimation
// ---------------------------------------------------------------------------

using HvpFn = std::function<Vector(const Vector&)>;

/// Mean of z^T (H z) over Rademacher probes; exact on the identity for any
/// probe count. Deterministic given rng.
double hutchinson_trace(const HvpFn& hvp, std::size_t dim, std::size_t probes, SeededRng rng);

// ---------------------------------------------------------------------------
// Loss curvature terms (second derivatives in probability space)
// ---------------------------------------------------------------------------

enum class LossFamily { cross_entropy, focal, brier, kl_hard, kl_soft, reverse_kl };

struct LossKind {
    LossFamily family = LossFamily::cross_entropy;
    double gamma = 2.0;          // focal only
    Vector soft_target;          // kl_soft / reverse_kl only; simplex vector

    static LossKind ce() { return {LossFamily::cross_entropy, 0.0, {}}; }
    static LossKind focal_loss(double g) { return {LossFamily::focal, g, {}}; }
    static LossKind brier() { return {LossFamily::brier, 0.0, {}}; }
    static LossKind kl_hard() { return {LossFamily::kl_hard, 0.0, {}}; }
    static LossKind kl_soft(Vector q) { return {LossFamily::kl_soft, 0.0, std::move(q)}; }
    static LossKind reverse_kl(Vector q) { return {LossFamily::reverse_kl, 0.0, std::move(q)}; }
};

struct CurvatureTerms {
    double h_true = 0.0;          // h_y(p)
    Vector h_other;               // h_j(p) for every class (entry y mirrors h_true)
    bool assumption_a_ok = true;  // the bounded-curvature condition
};

/// Analytic second derivatives h_i(p) of the loss w.r.t. class probabilities,
/// with the boundedness flag. p must be strictly interior to the simplex.
CurvatureTerms loss_curvature_terms(const LossKind& loss, const Vector& p, std::size_t y);

// ---------------------------------------------------------------------------
// Confidence collapse under logit scaling
// ---------------------------------------------------------------------------

struct CollapseSample {
    std::size_t sample_id = 0;
    double margin = 0.0;             // Delta_min at alpha = 1
    std::vector<double> trace;       // tr H_ce per alpha
    std::vector<double> kappa_spectral;
    std::vector<double> kappa_frobenius;
    std::vector<double> confidence;  // p_y per alpha
};

struct CollapseCurve {
    std::vector<double> alphas;
    std::vector<CollapseSample> samples;          // correctly classified only
    std::size_t excluded_nonpositive_margin = 0;
    std::vector<double> mean_kappa_spectral;      // per alpha
    std::vector<double> mean_kappa_frobenius;
    std::vector<double> mean_trace;
};

/// Evaluates the alpha-scaled classifier over the batch. Samples with
/// nonpositive margin are excluded and counted. For every kept sample the
/// exponential envelope tr H_ce(alpha) <= 2(k-1) exp(-alpha * margin) holds.
CollapseCurve collapse_curve(const MlpNetwork& net, const SampleBatch& batch,
                             const std::vector<double>& alphas);

}  // namespace sharplab

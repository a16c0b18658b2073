#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sharplab/curvature.hpp"
#include "sharplab/network.hpp"

namespace sharplab {

enum class AttackNorm { l2, linf };

struct AttackConfig {
    AttackNorm norm = AttackNorm::l2;
    double epsilon = 0.025;
    double step_size = 0.001;
    std::size_t steps = 25;
    std::uint64_t seed = 0;
    bool random_start = false;    // deterministic clean start by default
    bool record_trajectory = true;

    void validate() const;
};

struct TrajectoryPoint {
    double loss = 0.0;
    std::size_t predicted = 0;
    double confidence = 0.0;
    double kappa_spectral = 0.0;
    double kappa_frobenius = 0.0;
    double l2_dist_from_clean = 0.0;
    bool zero_gradient = false;  // gradient vanished at this step
};

struct AttackTrajectory {
    std::size_t sample_id = 0;
    std::size_t label = 0;
    std::vector<Vector> iterates;       // x_0 (clean) ... x_T; empty if not recorded
    std::vector<TrajectoryPoint> points;  // always length steps + 1
    Vector final_iterate;

    double clean_loss() const { return points.front().loss; }
    double final_loss() const { return points.back().loss; }
    bool flipped() const { return points.back().predicted != label; }
};

/// PGD in the configured norm: signed-gradient (linf) or normalized-gradient
/// (l2) steps, projected to the epsilon ball around the clean point and then
/// to the [0,1] box. Deterministic; per-sample RNG streams derive from
/// (seed, sample_id) so parallel and serial runs agree.
std::vector<AttackTrajectory> pgd_attack(const MlpNetwork& net, const SampleBatch& batch,
                                         const AttackConfig& config);
AttackTrajectory pgd_attack_one(const MlpNetwork& net, const Vector& x, std::size_t label,
                                std::size_t sample_id, const AttackConfig& config);

struct LossChangeVerdict {
    bool adversarial = false;
    double delta = 0.0;          // ||xi - x||_2
    double loss_increase = 0.0;
};

/// The loss-change criterion: xi is (delta, eps)-adversarial for (x, y)
/// iff loss(f(xi), y) - loss(f(x), y) > eps.
LossChangeVerdict is_loss_change_adversarial(const MlpNetwork& net, const Vector& x,
                                             const Vector& xi, std::size_t y, double eps);

struct RobustnessVerdict {
    bool robust = false;  // "no counterexample found" by the attack search
    std::vector<std::size_t> violating_samples;
};

/// Empirical (delta, eps)-robustness over S: attack each sample within
/// radius delta and flag any found loss increase above eps. Attack failure
/// does not prove robustness; the flag means no counterexample was found.
RobustnessVerdict dataset_loss_robustness(const MlpNetwork& net, const SampleBatch& batch,
                                          double delta, double eps, AttackConfig attack);

/// The second-order loss-increase bound:
/// (delta^2 / 2r^2) L^2 kappa + (delta^3 / 24 r^3) k m L^6.
double loss_increase_bound(double delta, double kappa_frobenius, std::size_t k, std::size_t m,
                           double lipschitz, double min_feature_norm);

struct Certificate {
    double epsilon = 0.0;
    double kappa_frobenius = 0.0;
    std::size_t k = 0;
    std::size_t m = 0;
    double lipschitz = 0.0;        // L
    double min_feature_norm = 0.0; // r
    double delta_cert = 0.0;       // certified input-space radius
    double feature_radius = 0.0;   // Delta, the root in feature space
    double cubic_residual = 0.0;
    std::string branch;
    double gradient_term = 0.0;    // first-order coefficient carried, 0 at a minimum
};

/// Certified radius: Delta solves (kappa/2) Delta^2 + (k m L^3 / 24) Delta^3
/// = eps, then delta_cert = r * Delta / L. For kappa = 0 this equals
/// (r/L) * (24 eps / (k m L^3))^(1/3) exactly.
Certificate certified_radius(double eps, double kappa_frobenius, std::size_t k, std::size_t m,
                             double lipschitz, double min_feature_norm);

/// Same certificate with the first-order Taylor term carried along:
/// grad_term * Delta + (kappa/2) Delta^2 + a Delta^3 = eps. Used away from
/// an exact minimum, where the training gradient has not fully vanished.
Certificate certified_radius_with_gradient(double eps, double kappa_frobenius,
                                           double grad_term, std::size_t k, std::size_t m,
                                           double lipschitz, double min_feature_norm);

struct LipschitzEstimate {
    double upper = 0.0;            // product of per-layer spectral norms of phi
    double lower_empirical = 0.0;  // max pairwise ||phi(x)-phi(x')|| / ||x-x'||
    std::size_t pairs_used = 0;
    std::uint64_t seed = 0;
};

/// Upper bound = product of spectral norms over phi's layers (ReLU is
/// 1-Lipschitz); empirical lower bound from random and nearest-neighbor pairs.
LipschitzEstimate lipschitz_estimate(const MlpNetwork& net, const SampleBatch& data,
                                     std::size_t pairs, std::uint64_t seed);

/// Minimum feature norm floor below which certificates are refused.
inline constexpr double kFeatureNormFloor = 1e-9;

struct FeatureNormReport {
    double r = 0.0;
    std::vector<std::size_t> degenerate_samples;  // ||phi(x)|| below the floor
};

FeatureNormReport min_feature_norm(const MlpNetwork& net, const SampleBatch& data);

/// Upper-bound estimate of the smallest loss increase over prediction-flipping
/// perturbations within radius delta: minimum observed over attack iterates
/// that flip. Empty when no flips are found.
std::optional<double> estimate_epsilon_star(const MlpNetwork& net, const SampleBatch& batch,
                                            double delta, AttackConfig attack);

}  // namespace sharplab

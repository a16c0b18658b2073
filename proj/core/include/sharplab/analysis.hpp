#pragma once

#include <optional>
#include <vector>

#include "sharplab/robustness.hpp"

namespace sharplab {

// ---------------------------------------------------------------------------
// Trajectory metrics
// ---------------------------------------------------------------------------

struct TrajectorySummary {
    std::size_t sample_id = 0;
    double loss_increase = 0.0;              // x_0 -> x_T
    std::vector<double> kappa_series;        // spectral, per iterate
    std::vector<double> normalized_loss;     // min-max per trajectory; zeros if constant
    bool flipped = false;
    bool peak_then_decay = false;            // kappa peaks strictly inside and halves by the end
};

struct TrajectoryMetrics {
    std::vector<TrajectorySummary> per_trajectory;
    double peak_then_decay_fraction = 0.0;   // over flipped trajectories
    std::size_t flipped_count = 0;
};

TrajectoryMetrics trajectory_metrics(const std::vector<AttackTrajectory>& trajectories);

/// Smallest t >= 1 with loss_t - loss_0 > tau * (max loss - loss_0);
/// nullopt when the series never rises.
std::optional<std::size_t> take_off(const std::vector<double>& loss_series, double tau);

inline constexpr double kDefaultTakeOffTau = 0.1;

// ---------------------------------------------------------------------------
// Basin geometry
// ---------------------------------------------------------------------------

struct BasinSample {
    std::size_t sample_id = 0;
    std::optional<std::size_t> take_off_iter;
    double kappa_at_clean = 0.0;
};

struct BasinReport {
    std::vector<BasinSample> samples;
    std::optional<double> spearman;  // rho(kappa@0, basin width); unset below 3 points
    bool all_tied = false;
};

BasinReport basin_report(const std::vector<AttackTrajectory>& trajectories,
                         double tau = kDefaultTakeOffTau);

/// Spearman rank correlation with average-rank tie handling.
/// Returns 0 with *all_tied = true when either ranking is constant.
double spearman_rho(const std::vector<double>& a, const std::vector<double>& b, bool* all_tied);

// ---------------------------------------------------------------------------
// Scaling sweep
// ---------------------------------------------------------------------------

struct ScaleEntry {
    double s = 1.0;
    double clean_accuracy = 0.0;
    double robust_accuracy = 0.0;
    double mean_kappa_spectral = 0.0;
    double mean_kappa_frobenius = 0.0;
    double transfer_rate = 0.0;  // s=1 prediction-flip adversarials still flipping here
};

struct ScaleSweepResult {
    std::vector<ScaleEntry> entries;
};

/// For each s: attack scale_penultimate(net, s) with the same budget, then
/// evaluate the s=1 adversarial endpoints on the scaled copy for transfer.
ScaleSweepResult scale_sweep(const MlpNetwork& net, const std::vector<double>& s_list,
                             const AttackConfig& attack, const SampleBatch& data);

// ---------------------------------------------------------------------------
// Decision stump detector
// ---------------------------------------------------------------------------

struct DetectorResult {
    double threshold = 0.0;  // from the last fold, for reporting
    std::vector<double> fold_accuracies;
    double mean_accuracy = 0.0;
    std::size_t folds = 0;
    std::uint64_t seed = 0;
};

/// Stratified k-fold cross-validation of a one-threshold stump on scalar
/// values (midpoint splits, both directions). Rank-based, so invariant to
/// strictly monotone transforms of the values.
DetectorResult stump_detector_cv(const std::vector<double>& values,
                                 const std::vector<int>& labels, std::size_t folds,
                                 std::uint64_t seed);

// ---------------------------------------------------------------------------
// Histograms
// ---------------------------------------------------------------------------

struct HistogramBin {
    double left = 0.0;
    double right = 0.0;
    std::size_t count = 0;
};

std::vector<HistogramBin> histogram(const std::vector<double>& values, std::size_t bins = 30);

}  // namespace sharplab

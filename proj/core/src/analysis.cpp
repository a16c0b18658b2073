#include "sharplab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sharplab {

TrajectoryMetrics trajectory_metrics(const std::vector<AttackTrajectory>& trajectories) {
    TrajectoryMetrics metrics;
    std::size_t decays = 0;
    for (const auto& traj : trajectories) {
        TrajectorySummary s;
        s.sample_id = traj.sample_id;
        s.flipped = traj.flipped();
        s.loss_increase = traj.final_loss() - traj.clean_loss();

        std::vector<double> losses;
        for (const auto& p : traj.points) {
            losses.push_back(p.loss);
            s.kappa_series.push_back(p.kappa_spectral);
        }
        const double lo = *std::min_element(losses.begin(), losses.end());
        const double hi = *std::max_element(losses.begin(), losses.end());
        s.normalized_loss.resize(losses.size(), 0.0);
        if (hi > lo)
            for (std::size_t t = 0; t < losses.size(); ++t)
                s.normalized_loss[t] = (losses[t] - lo) / (hi - lo);

        const double first = s.kappa_series.front();
        const double last = s.kappa_series.back();
        const double peak = *std::max_element(s.kappa_series.begin(), s.kappa_series.end());
        s.peak_then_decay = peak > std::max(first, last) && last < peak / 2.0;

        if (s.flipped) {
            ++metrics.flipped_count;
            if (s.peak_then_decay) ++decays;
        }
        metrics.per_trajectory.push_back(std::move(s));
    }
    metrics.peak_then_decay_fraction =
        metrics.flipped_count ? static_cast<double>(decays) / metrics.flipped_count : 0.0;
    return metrics;
}

std::optional<std::size_t> take_off(const std::vector<double>& loss_series, double tau) {
    if (loss_series.size() < 2) throw std::invalid_argument("take_off: series too short");
    if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("take_off: tau must be in (0,1)");
    const double base = loss_series.front();
    const double peak = *std::max_element(loss_series.begin(), loss_series.end());
    if (!(peak > base)) return std::nullopt;
    const double bar = tau * (peak - base);
    for (std::size_t t = 1; t < loss_series.size(); ++t)
        if (loss_series[t] - base > bar) return t;
    return std::nullopt;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t q = i; q <= j; ++q) ranks[order[q]] = avg;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman_rho(const std::vector<double>& a, const std::vector<double>& b, bool* all_tied) {
    if (a.size() != b.size() || a.size() < 2)
        throw std::invalid_argument("spearman_rho: need two equal-length series");
    const std::vector<double> ra = average_ranks(a);
    const std::vector<double> rb = average_ranks(b);
    const std::size_t n = a.size();
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (va == 0.0 || vb == 0.0) {
        if (all_tied) *all_tied = true;
        return 0.0;
    }
    if (all_tied) *all_tied = false;
    return cov / std::sqrt(va * vb);
}

BasinReport basin_report(const std::vector<AttackTrajectory>& trajectories, double tau) {
    BasinReport report;
    std::vector<double> kappas, widths;
    for (const auto& traj : trajectories) {
        BasinSample s;
        s.sample_id = traj.sample_id;
        s.kappa_at_clean = traj.points.front().kappa_spectral;
        std::vector<double> losses;
        for (const auto& p : traj.points) losses.push_back(p.loss);
        s.take_off_iter = take_off(losses, tau);
        if (s.take_off_iter) {
            kappas.push_back(s.kappa_at_clean);
            widths.push_back(static_cast<double>(*s.take_off_iter));
        }
        report.samples.push_back(std::move(s));
    }
    if (kappas.size() >= 3)
        report.spearman = spearman_rho(kappas, widths, &report.all_tied);
    return report;
}

ScaleSweepResult scale_sweep(const MlpNetwork& net, const std::vector<double>& s_list,
                             const AttackConfig& attack, const SampleBatch& data) {
    for (double s : s_list)
        if (!(s > 0.0)) throw std::invalid_argument("scale_sweep: scales must be positive");

    // adversarial endpoints at s = 1 that flip the prediction
    const MlpNetwork base = scale_penultimate(net, 1.0);
    const std::vector<AttackTrajectory> base_trajs = pgd_attack(base, data, attack);
    std::vector<std::pair<Vector, std::size_t>> base_adversarial;  // (endpoint, label)
    for (const auto& traj : base_trajs)
        if (traj.flipped()) base_adversarial.emplace_back(traj.final_iterate, traj.label);

    ScaleSweepResult result;
    for (double s : s_list) {
        const MlpNetwork scaled = scale_penultimate(net, s);
        ScaleEntry entry;
        entry.s = s;
        entry.clean_accuracy = accuracy(scaled, data);
        const std::vector<AttackTrajectory> trajs = pgd_attack(scaled, data, attack);
        std::size_t robust = 0;
        for (const auto& traj : trajs)
            if (!traj.flipped()) ++robust;
        entry.robust_accuracy =
            data.size() ? static_cast<double>(robust) / data.size() : 0.0;
        const SharpnessReport sharp = relative_sharpness(scaled, data);
        entry.mean_kappa_spectral = sharp.mean_kappa_spectral;
        entry.mean_kappa_frobenius = sharp.mean_kappa_frobenius;
        if (!base_adversarial.empty()) {
            std::size_t transferred = 0;
            for (const auto& [xi, label] : base_adversarial)
                if (predict(scaled, xi) != label) ++transferred;
            entry.transfer_rate =
                static_cast<double>(transferred) / base_adversarial.size();
        } else {
            entry.transfer_rate = 1.0;  // vacuous
        }
        result.entries.push_back(entry);
    }
    return result;
}

DetectorResult stump_detector_cv(const std::vector<double>& values,
                                 const std::vector<int>& labels, std::size_t folds,
                                 std::uint64_t seed) {
    if (values.size() != labels.size() || values.empty())
        throw std::invalid_argument("stump_detector_cv: values/labels mismatch");
    if (folds < 2) throw std::invalid_argument("stump_detector_cv: need >= 2 folds");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i)
        (labels[i] ? pos : neg).push_back(i);
    if (pos.empty() || neg.empty())
        throw std::invalid_argument("stump_detector_cv: both classes must be present");

    SeededRng rng(seed, 0xde7ec7ULL);
    rng.shuffle(pos);
    rng.shuffle(neg);

    // stratified fold assignment
    std::vector<std::size_t> fold_of(values.size(), 0);
    for (std::size_t i = 0; i < pos.size(); ++i) fold_of[pos[i]] = i % folds;
    for (std::size_t i = 0; i < neg.size(); ++i) fold_of[neg[i]] = i % folds;

    auto stump_accuracy = [&](const std::vector<std::size_t>& idx, double thr, int dir) {
        std::size_t correct = 0;
        for (std::size_t i : idx) {
            const int pred = (dir > 0) == (values[i] > thr) ? 1 : 0;
            if (pred == labels[i]) ++correct;
        }
        return idx.empty() ? 0.0 : static_cast<double>(correct) / idx.size();
    };

    DetectorResult result;
    result.folds = folds;
    result.seed = seed;
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> train_idx, test_idx;
        for (std::size_t i = 0; i < values.size(); ++i)
            (fold_of[i] == f ? test_idx : train_idx).push_back(i);

        std::vector<double> train_vals;
        for (std::size_t i : train_idx) train_vals.push_back(values[i]);
        std::sort(train_vals.begin(), train_vals.end());
        train_vals.erase(std::unique(train_vals.begin(), train_vals.end()), train_vals.end());

        std::vector<double> candidates;
        candidates.push_back(train_vals.front() - 1.0);
        for (std::size_t i = 0; i + 1 < train_vals.size(); ++i)
            candidates.push_back(0.5 * (train_vals[i] + train_vals[i + 1]));
        candidates.push_back(train_vals.back() + 1.0);

        double best_thr = candidates.front();
        int best_dir = 1;
        double best_acc = -1.0;
        for (double thr : candidates)
            for (int dir : {1, -1}) {
                const double acc = stump_accuracy(train_idx, thr, dir);
                if (acc > best_acc) {
                    best_acc = acc;
                    best_thr = thr;
                    best_dir = dir;
                }
            }
        result.threshold = best_thr;
        result.fold_accuracies.push_back(stump_accuracy(test_idx, best_thr, best_dir));
    }
    result.mean_accuracy =
        std::accumulate(result.fold_accuracies.begin(), result.fold_accuracies.end(), 0.0) /
        result.fold_accuracies.size();
    return result;
}

std::vector<HistogramBin> histogram(const std::vector<double>& values, std::size_t bins) {
    std::vector<HistogramBin> out;
    if (values.empty() || bins == 0) return out;
    const double lo = *std::min_element(values.begin(), values.end());
    double hi = *std::max_element(values.begin(), values.end());
    if (hi == lo) hi = lo + 1.0;
    const double width = (hi - lo) / static_cast<double>(bins);
    out.resize(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        out[b].left = lo + width * b;
        out[b].right = lo + width * (b + 1);
    }
    for (double v : values) {
        std::size_t b = static_cast<std::size_t>((v - lo) / width);
        if (b >= bins) b = bins - 1;
        ++out[b].count;
    }
    return out;
}

}  // namespace sharplab

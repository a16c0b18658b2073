#include "sharplab/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sharplab/cubic.hpp"

namespace sharplab {

void AttackConfig::validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("AttackConfig: epsilon must be positive");
    if (!(step_size > 0.0)) throw std::invalid_argument("AttackConfig: step size must be positive");
}

namespace {

void project_ball(Vector& x, const Vector& clean, AttackNorm norm, double eps) {
    if (norm == AttackNorm::linf) {
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = std::clamp(x[i], clean[i] - eps, clean[i] + eps);
    } else {
        Vector d(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - clean[i];
        const double n = norm2(d);
        if (n > eps) {
            const double scale = eps / n;
            for (std::size_t i = 0; i < x.size(); ++i) x[i] = clean[i] + d[i] * scale;
        }
    }
}

void project_box(Vector& x) {
    for (auto& v : x) v = std::clamp(v, 0.0, 1.0);
}

TrajectoryPoint eval_point(const MlpNetwork& net, const Vector& x, const Vector& clean,
                           std::size_t label, double w_spec, double w_frob_sq) {
    const ForwardCache cache = forward(net, x);
    TrajectoryPoint p;
    p.loss = cross_entropy(cache.yhat, label);
    p.predicted = argmax_lowest_tie(cache.logits);
    p.confidence = cache.yhat[label];
    const double tr = penultimate_hessian_trace(cache.yhat, cache.phi);
    p.kappa_spectral = w_spec * tr;
    p.kappa_frobenius = w_frob_sq * tr;
    Vector d(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - clean[i];
    p.l2_dist_from_clean = norm2(d);
    return p;
}

}  // namespace

AttackTrajectory pgd_attack_one(const MlpNetwork& net, const Vector& x, std::size_t label,
                                std::size_t sample_id, const AttackConfig& config) {
    config.validate();
    const double w_spec =
        net.classifier().max_abs() == 0.0 ? 0.0 : spectral_norm(net.classifier());
    const double w_frob = net.classifier().frobenius_norm();
    const double w_frob_sq = w_frob * w_frob;

    AttackTrajectory traj;
    traj.sample_id = sample_id;
    traj.label = label;

    Vector cur = x;
    if (config.random_start) {
        SeededRng rng = SeededRng(config.seed, 0xa77ac4ULL).derive(sample_id);
        if (config.norm == AttackNorm::linf) {
            for (auto& v : cur) v += rng.uniform(-config.epsilon, config.epsilon);
        } else {
            Vector d(cur.size());
            for (auto& v : d) v = rng.normal();
            const double n = norm2(d);
            const double rad = config.epsilon * std::pow(rng.uniform(), 1.0 / cur.size());
            if (n > 0.0)
                for (std::size_t i = 0; i < cur.size(); ++i) cur[i] += d[i] * rad / n;
        }
        project_ball(cur, x, config.norm, config.epsilon);
        project_box(cur);
    }

    auto record = [&](const Vector& pt, bool zero_grad) {
        TrajectoryPoint p = eval_point(net, pt, x, label, w_spec, w_frob_sq);
        p.zero_gradient = zero_grad;
        traj.points.push_back(p);
        if (config.record_trajectory) traj.iterates.push_back(pt);
    };
    record(cur, false);

    for (std::size_t t = 0; t < config.steps; ++t) {
        Vector grad = input_gradient(net, cur, label);
        bool zero_grad = false;
        if (config.norm == AttackNorm::linf) {
            bool all_zero = true;
            for (std::size_t i = 0; i < cur.size(); ++i) {
                if (grad[i] != 0.0) all_zero = false;
                cur[i] += config.step_size * (grad[i] > 0.0 ? 1.0 : (grad[i] < 0.0 ? -1.0 : 0.0));
            }
            zero_grad = all_zero;
        } else {
            const double n = norm2(grad);
            if (n == 0.0) {
                zero_grad = true;  // iterate unchanged this step
            } else {
                for (std::size_t i = 0; i < cur.size(); ++i)
                    cur[i] += config.step_size * grad[i] / n;
            }
        }
        project_ball(cur, x, config.norm, config.epsilon);
        project_box(cur);
        record(cur, zero_grad);
    }
    traj.final_iterate = cur;
    return traj;
}

std::vector<AttackTrajectory> pgd_attack(const MlpNetwork& net, const SampleBatch& batch,
                                         const AttackConfig& config) {
    std::vector<AttackTrajectory> out;
    out.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i)
        out.push_back(pgd_attack_one(net, batch.input(i), batch.labels[i], i, config));
    return out;
}

LossChangeVerdict is_loss_change_adversarial(const MlpNetwork& net, const Vector& x,
                                             const Vector& xi, std::size_t y, double eps) {
    LossChangeVerdict v;
    Vector d(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) d[i] = xi[i] - x[i];
    v.delta = norm2(d);
    const double clean = cross_entropy(forward(net, x).yhat, y);
    const double pert = cross_entropy(forward(net, xi).yhat, y);
    v.loss_increase = pert - clean;
    v.adversarial = v.loss_increase > eps;
    return v;
}

RobustnessVerdict dataset_loss_robustness(const MlpNetwork& net, const SampleBatch& batch,
                                          double delta, double eps, AttackConfig attack) {
    RobustnessVerdict verdict;
    verdict.robust = true;
    if (delta <= 0.0) return verdict;  // empty ball
    attack.epsilon = delta;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const AttackTrajectory traj = pgd_attack_one(net, batch.input(i), batch.labels[i], i, attack);
        double worst = 0.0;
        for (const auto& p : traj.points) worst = std::max(worst, p.loss - traj.clean_loss());
        if (worst > eps) {
            verdict.robust = false;
            verdict.violating_samples.push_back(i);
        }
    }
    return verdict;
}

double loss_increase_bound(double delta, double kappa_frobenius, std::size_t k, std::size_t m,
                           double lipschitz, double min_feature_norm) {
    const double L = lipschitz;
    const double r = min_feature_norm;
    const double quad = delta * delta / (2.0 * r * r) * L * L * kappa_frobenius;
    const double cube = delta * delta * delta / (24.0 * r * r * r) *
                        static_cast<double>(k) * static_cast<double>(m) * std::pow(L, 6);
    return quad + cube;
}

Certificate certified_radius(double eps, double kappa_frobenius, std::size_t k, std::size_t m,
                             double lipschitz, double min_feature_norm) {
    if (!(eps > 0.0) || !(lipschitz > 0.0) || !(min_feature_norm > 0.0) || kappa_frobenius < 0.0)
        throw std::invalid_argument("certified_radius: bad inputs");
    Certificate cert;
    cert.epsilon = eps;
    cert.kappa_frobenius = kappa_frobenius;
    cert.k = k;
    cert.m = m;
    cert.lipschitz = lipschitz;
    cert.min_feature_norm = min_feature_norm;

    CubicProblem p;
    p.cubic_coeff = static_cast<double>(k) * static_cast<double>(m) *
                    lipschitz * lipschitz * lipschitz / 24.0;
    p.quad_coeff = kappa_frobenius / 2.0;
    p.target = eps;
    const CubicRoot root = unique_positive_cubic_root(p);
    cert.feature_radius = root.root;
    cert.cubic_residual = root.residual;
    cert.branch = root.branch;
    cert.delta_cert = min_feature_norm * root.root / lipschitz;
    return cert;
}

Certificate certified_radius_with_gradient(double eps, double kappa_frobenius,
                                           double grad_term, std::size_t k, std::size_t m,
                                           double lipschitz, double min_feature_norm) {
    if (grad_term <= 0.0)
        return certified_radius(eps, kappa_frobenius, k, m, lipschitz, min_feature_norm);
    Certificate cert;
    cert.epsilon = eps;
    cert.kappa_frobenius = kappa_frobenius;
    cert.k = k;
    cert.m = m;
    cert.lipschitz = lipschitz;
    cert.min_feature_norm = min_feature_norm;
    cert.gradient_term = grad_term;
    const double a = static_cast<double>(k) * static_cast<double>(m) *
                     lipschitz * lipschitz * lipschitz / 24.0;
    const double b = kappa_frobenius / 2.0;
    const double delta = unique_positive_root_with_linear(a, b, grad_term, eps);
    cert.feature_radius = delta;
    cert.cubic_residual = std::fabs(((a * delta + b) * delta + grad_term) * delta - eps);
    cert.branch = "bracketed-newton";
    cert.delta_cert = min_feature_norm * delta / lipschitz;
    return cert;
}

LipschitzEstimate lipschitz_estimate(const MlpNetwork& net, const SampleBatch& data,
                                     std::size_t pairs, std::uint64_t seed) {
    LipschitzEstimate est;
    est.seed = seed;
    double upper = 1.0;
    const auto& layers = net.layers();
    for (std::size_t l = 0; l + 1 < layers.size(); ++l)
        upper *= spectral_norm(layers[l].weight);
    est.upper = upper;

    if (data.size() < 2) {
        est.lower_empirical = 0.0;
        return est;
    }
    SeededRng rng(seed, 0x11b5ULL);
    double lower = 0.0;
    std::size_t used = 0;
    auto try_pair = [&](std::size_t i, std::size_t j) {
        if (i == j) return;
        const Vector xi = data.input(i), xj = data.input(j);
        Vector d(xi.size());
        for (std::size_t q = 0; q < d.size(); ++q) d[q] = xi[q] - xj[q];
        const double dx = norm2(d);
        if (dx == 0.0) return;
        const Vector fi = net.features(xi), fj = net.features(xj);
        Vector df(fi.size());
        for (std::size_t q = 0; q < df.size(); ++q) df[q] = fi[q] - fj[q];
        lower = std::max(lower, norm2(df) / dx);
        ++used;
    };
    for (std::size_t p = 0; p < pairs; ++p)
        try_pair(rng.uniform_int(data.size()), rng.uniform_int(data.size()));
    // nearest-neighbor pairs probe the local slope
    const std::size_t n_nn = std::min<std::size_t>(data.size(), 64);
    for (std::size_t i = 0; i < n_nn; ++i) {
        std::size_t best = i;
        double best_d = 1e300;
        for (std::size_t j = 0; j < data.size(); ++j) {
            if (j == i) continue;
            const Vector xi = data.input(i), xj = data.input(j);
            Vector d(xi.size());
            for (std::size_t q = 0; q < d.size(); ++q) d[q] = xi[q] - xj[q];
            const double dist = norm2(d);
            if (dist > 0.0 && dist < best_d) {
                best_d = dist;
                best = j;
            }
        }
        if (best != i) try_pair(i, best);
    }
    if (used == 0)
        throw std::runtime_error("lipschitz_estimate: all data points identical, lower undefined");
    est.lower_empirical = lower;
    est.pairs_used = used;
    return est;
}

FeatureNormReport min_feature_norm(const MlpNetwork& net, const SampleBatch& data) {
    if (data.size() == 0) throw std::invalid_argument("min_feature_norm: empty data");
    FeatureNormReport report;
    report.r = 1e300;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double n = norm2(net.features(data.input(i)));
        report.r = std::min(report.r, n);
        if (n < kFeatureNormFloor) report.degenerate_samples.push_back(i);
    }
    return report;
}

std::optional<double> estimate_epsilon_star(const MlpNetwork& net, const SampleBatch& batch,
                                            double delta, AttackConfig attack) {
    if (delta <= 0.0) return std::nullopt;
    attack.epsilon = delta;
    attack.record_trajectory = true;
    std::optional<double> best;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const AttackTrajectory traj = pgd_attack_one(net, batch.input(i), batch.labels[i], i, attack);
        const std::size_t clean_pred = traj.points.front().predicted;
        for (std::size_t t = 1; t < traj.points.size(); ++t) {
            if (traj.points[t].predicted != clean_pred) {
                const double inc = traj.points[t].loss - traj.clean_loss();
                if (!best || inc < *best) best = inc;
            }
        }
    }
    return best;
}

}  // namespace sharplab

#include "sharplab/curvature.hpp"

#include <cmath>
#include <stdexcept>

namespace sharplab {

namespace {

void check_simplex(const Vector& p) {
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("expected a simplex vector");
        sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("expected a simplex vector (entries must sum to 1)");
}

void check_interior(const Vector& p) {
    check_simplex(p);
    for (double v : p)
        if (!(v > 0.0 && v < 1.0))
            throw std::invalid_argument("expected a strictly interior simplex point");
}

}  // namespace

Matrix logit_hessian(const Vector& yhat) {
    check_simplex(yhat);
    const std::size_t k = yhat.size();
    Matrix h(k, k);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
            h(i, j) = (i == j ? yhat[i] : 0.0) - yhat[i] * yhat[j];
    return h;
}

Matrix penultimate_hessian(const Vector& yhat, const Vector& phi) {
    for (double v : phi)
        if (!std::isfinite(v)) throw std::invalid_argument("penultimate_hessian: non-finite phi");
    return kron(logit_hessian(yhat), Matrix::outer(phi));
}

double penultimate_hessian_trace(const Vector& yhat, const Vector& phi) {
    double conf = 0.0;
    for (double p : yhat) conf += p * (1.0 - p);
    double phi_sq = 0.0;
    for (double v : phi) phi_sq += v * v;
    return conf * phi_sq;
}

SharpnessRecord sample_sharpness(const MlpNetwork& net, const Vector& x, std::size_t label,
                                 std::size_t sample_id, double w_spectral, double w_frob_sq) {
    const ForwardCache cache = forward(net, x);
    const double tr = penultimate_hessian_trace(cache.yhat, cache.phi);
    SharpnessRecord rec;
    rec.sample_id = sample_id;
    rec.loss = cross_entropy(cache.yhat, label);
    rec.confidence = cache.yhat[label];
    rec.kappa_spectral = w_spectral * tr;
    rec.kappa_frobenius = w_frob_sq * tr;
    return rec;
}

SharpnessReport relative_sharpness(const MlpNetwork& net, const SampleBatch& batch) {
    const double w_spec = spectral_norm(net.classifier());
    const double w_frob = net.classifier().frobenius_norm();
    SharpnessReport report;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        report.per_sample.push_back(
            sample_sharpness(net, batch.input(i), batch.labels[i], i, w_spec, w_frob * w_frob));
        report.mean_kappa_spectral += report.per_sample.back().kappa_spectral;
        report.mean_kappa_frobenius += report.per_sample.back().kappa_frobenius;
        report.mean_loss += report.per_sample.back().loss;
    }
    if (!report.per_sample.empty()) {
        const double inv = 1.0 / static_cast<double>(report.per_sample.size());
        report.mean_kappa_spectral *= inv;
        report.mean_kappa_frobenius *= inv;
        report.mean_loss *= inv;
    }
    return report;
}

double Tensor3::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::fabs(v));
    return m;
}

Tensor3 third_derivative_tensor(const Vector& yhat, const Vector& phi) {
    check_simplex(yhat);
    const std::size_t k = yhat.size();
    const std::size_t m = phi.size();
    const std::size_t n = k * m;
    if (n > 64) throw std::invalid_argument("third_derivative_tensor: km exceeds the cap of 64");
    Tensor3 t(n);

    // class factor: d/dz_o of the logit Hessian entry yhat_j (1_{j=l} - yhat_l),
    // using d yhat_j / d z_o = yhat_j (1_{j=o} - yhat_o)
    auto class_term = [&](std::size_t j, std::size_t l, std::size_t o) {
        const double dyj = yhat[j] * ((j == o ? 1.0 : 0.0) - yhat[o]);
        const double dyl = yhat[l] * ((l == o ? 1.0 : 0.0) - yhat[o]);
        return (j == l ? dyj : 0.0) - (dyj * yhat[l] + yhat[j] * dyl);
    };

    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t l = 0; l < k; ++l)
            for (std::size_t o = 0; o < k; ++o) {
                const double ct = class_term(j, l, o);
                if (ct == 0.0) continue;
                for (std::size_t a = 0; a < m; ++a)
                    for (std::size_t b = 0; b < m; ++b)
                        for (std::size_t c = 0; c < m; ++c)
                            t(j * m + a, l * m + b, o * m + c) = ct * phi[a] * phi[b] * phi[c];
            }
    return t;
}

BackpropResult hessian_backprop(const MlpNetwork& net, const Vector& x, std::size_t label,
                                double kink_margin) {
    const ForwardCache cache = forward(net, x);
    const auto& layers = net.layers();
    const std::size_t nl = layers.size();

    BackpropResult result;
    result.layers.resize(nl);
    for (std::size_t l = 0; l < nl; ++l)
        for (double a : cache.pre_activations[l])
            if (layers[l].activation == Activation::relu && std::fabs(a) < kink_margin)
                result.near_kink = true;

    Vector g = cache.yhat;
    g[label] -= 1.0;
    Matrix h = logit_hessian(cache.yhat);

    for (std::size_t l = nl; l-- > 0;) {
        const Layer& layer = layers[l];
        const std::size_t out_dim = layer.weight.rows();

        std::vector<bool> mask(out_dim, true);
        if (layer.activation == Activation::relu)
            for (std::size_t i = 0; i < out_dim; ++i)
                mask[i] = cache.pre_activations[l][i] > 0.0;

        // B = D H D
        Matrix masked = h;
        for (std::size_t i = 0; i < out_dim; ++i)
            for (std::size_t j = 0; j < out_dim; ++j)
                if (!mask[i] || !mask[j]) masked(i, j) = 0.0;

        const Vector& below = l == 0 ? x : cache.post_activations[l - 1];

        LayerCurvature lc;
        lc.layer = l;
        lc.gradient = g;
        lc.activation_hessian = h;
        lc.relu_mask = mask;
        lc.weight_hessian = kron(Matrix::outer(below), masked);
        result.layers[l] = std::move(lc);

        if (l == 0) break;

        const Matrix& w = layer.weight;
        Vector g_next(w.cols(), 0.0);
        for (std::size_t i = 0; i < out_dim; ++i) {
            if (!mask[i] || g[i] == 0.0) continue;
            for (std::size_t j = 0; j < w.cols(); ++j) g_next[j] += w(i, j) * g[i];
        }
        // H^{l-1} = W^T B W
        h = w.transpose() * masked * w;
        g = std::move(g_next);
    }
    return result;
}

Matrix commute_kron_order(const Matrix& h, std::size_t p, std::size_t q) {
    if (h.rows() != p * q || h.cols() != p * q)
        throw std::invalid_argument("commute_kron_order: dimension mismatch");
    Matrix out(p * q, p * q);
    for (std::size_t a = 0; a < p; ++a)
        for (std::size_t i = 0; i < q; ++i)
            for (std::size_t b = 0; b < p; ++b)
                for (std::size_t j = 0; j < q; ++j)
                    out(i * p + a, j * p + b) = h(a * q + i, b * q + j);
    return out;
}

double hutchinson_trace(const HvpFn& hvp, std::size_t dim, std::size_t probes, SeededRng rng) {
    if (probes == 0) throw std::invalid_argument("hutchinson_trace: need at least one probe");
    double acc = 0.0;
    for (std::size_t p = 0; p < probes; ++p) {
        Vector z(dim);
        for (auto& v : z) v = rng.rademacher();
        const Vector hz = hvp(z);
        if (hz.size() != dim) throw std::invalid_argument("hutchinson_trace: hvp size mismatch");
        for (double v : hz)
            if (!std::isfinite(v)) throw std::runtime_error("hutchinson_trace: non-finite hvp");
        acc += dot(z, hz);
    }
    return acc / static_cast<double>(probes);
}

CurvatureTerms loss_curvature_terms(const LossKind& loss, const Vector& p, std::size_t y) {
    check_interior(p);
    if (y >= p.size()) throw std::invalid_argument("loss_curvature_terms: label out of range");
    const std::size_t k = p.size();
    CurvatureTerms out;
    out.h_other.assign(k, 0.0);
    const double py = p[y];

    switch (loss.family) {
        case LossFamily::cross_entropy:
        case LossFamily::kl_hard:
            out.h_true = 1.0 / (py * py);
            out.assumption_a_ok = true;
            break;
        case LossFamily::focal: {
            const double g = loss.gamma;
            const double v = 1.0 - py;
            out.h_true = std::pow(v, g - 2.0) *
                         (-g * (g - 1.0) * std::log(py) + 2.0 * g * v / py + v * v / (py * py));
            out.assumption_a_ok = g >= 1.0;
            break;
        }
        case LossFamily::brier:
            out.h_true = 2.0;
            for (auto& h : out.h_other) h = 2.0;
            out.assumption_a_ok = true;
            break;
        case LossFamily::kl_soft: {
            if (loss.soft_target.size() != k)
                throw std::invalid_argument("loss_curvature_terms: soft target size mismatch");
            bool off_class_mass = false;
            for (std::size_t i = 0; i < k; ++i) {
                out.h_other[i] = loss.soft_target[i] / (p[i] * p[i]);
                if (i != y && loss.soft_target[i] > 0.0) off_class_mass = true;
            }
            out.h_true = out.h_other[y];
            out.assumption_a_ok = !off_class_mass;
            break;
        }
        case LossFamily::reverse_kl:
            out.h_true = 1.0 / py;
            out.assumption_a_ok = true;
            break;
    }
    if (loss.family != LossFamily::brier && loss.family != LossFamily::kl_soft)
        out.h_other[y] = out.h_true;
    return out;
}

CollapseCurve collapse_curve(const MlpNetwork& net, const SampleBatch& batch,
                             const std::vector<double>& alphas) {
    for (std::size_t i = 1; i < alphas.size(); ++i)
        if (!(alphas[i] > alphas[i - 1]))
            throw std::invalid_argument("collapse_curve: alphas must be strictly increasing");

    CollapseCurve curve;
    curve.alphas = alphas;
    curve.mean_kappa_spectral.assign(alphas.size(), 0.0);
    curve.mean_kappa_frobenius.assign(alphas.size(), 0.0);
    curve.mean_trace.assign(alphas.size(), 0.0);

    const double w_spec = spectral_norm(net.classifier());
    const double w_frob = net.classifier().frobenius_norm();

    for (std::size_t i = 0; i < batch.size(); ++i) {
        const ForwardCache cache = forward(net, batch.input(i));
        const std::size_t y = batch.labels[i];
        double margin = 1e300;
        for (std::size_t j = 0; j < cache.logits.size(); ++j)
            if (j != y) margin = std::min(margin, cache.logits[y] - cache.logits[j]);
        if (!(margin > 0.0)) {
            ++curve.excluded_nonpositive_margin;
            continue;
        }
        CollapseSample sample;
        sample.sample_id = i;
        sample.margin = margin;
        double phi_sq = 0.0;
        for (double v : cache.phi) phi_sq += v * v;
        for (std::size_t a = 0; a < alphas.size(); ++a) {
            const double alpha = alphas[a];
            Vector scaled(cache.logits.size());
            for (std::size_t j = 0; j < scaled.size(); ++j) scaled[j] = alpha * cache.logits[j];
            const Vector p = softmax(scaled);
            double tr = 0.0;
            for (double v : p) tr += v * (1.0 - v);
            sample.trace.push_back(tr);
            sample.confidence.push_back(p[y]);
            sample.kappa_spectral.push_back(alpha * w_spec * tr * phi_sq);
            sample.kappa_frobenius.push_back(alpha * alpha * w_frob * w_frob * tr * phi_sq);
        }
        curve.samples.push_back(std::move(sample));
    }

    if (!curve.samples.empty()) {
        for (std::size_t a = 0; a < alphas.size(); ++a) {
            for (const auto& s : curve.samples) {
                curve.mean_kappa_spectral[a] += s.kappa_spectral[a];
                curve.mean_kappa_frobenius[a] += s.kappa_frobenius[a];
                curve.mean_trace[a] += s.trace[a];
            }
            const double inv = 1.0 / static_cast<double>(curve.samples.size());
            curve.mean_kappa_spectral[a] *= inv;
            curve.mean_kappa_frobenius[a] *= inv;
            curve.mean_trace[a] *= inv;
        }
    }
    return curve;
}

}  // namespace sharplab

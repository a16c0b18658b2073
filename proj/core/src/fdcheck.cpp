#include "sharplab/fdcheck.hpp"

#include <cmath>

#include "sharplab/curvature.hpp"

namespace sharplab {

double classifier_loss(const Matrix& w, const Vector& phi, std::size_t label) {
    return cross_entropy(softmax(w * phi), label);
}

Matrix fd_classifier_hessian(const Matrix& w, const Vector& phi, std::size_t label, double h) {
    const std::size_t n = w.size();
    Matrix out(n, n);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t q = p; q < n; ++q) {
            Matrix wpp = w, wpm = w, wmp = w, wmm = w;
            wpp.data()[p] += h; wpp.data()[q] += h;
            wpm.data()[p] += h; wpm.data()[q] -= h;
            wmp.data()[p] -= h; wmp.data()[q] += h;
            wmm.data()[p] -= h; wmm.data()[q] -= h;
            const double v = (classifier_loss(wpp, phi, label) - classifier_loss(wpm, phi, label) -
                              classifier_loss(wmp, phi, label) + classifier_loss(wmm, phi, label)) /
                             (4.0 * h * h);
            out(p, q) = v;
            out(q, p) = v;
        }
    return out;
}

namespace {

double batch_loss(const MlpNetwork& net, const SampleBatch& batch) {
    double total = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i)
        total += cross_entropy(forward(net, batch.input(i)).yhat, batch.labels[i]);
    return total / static_cast<double>(batch.size());
}

double sample_loss_perturbed(MlpNetwork net, const Vector& x, std::size_t label,
                             std::size_t layer, std::size_t flat_idx, double bump) {
    net.layers()[layer].weight.data()[flat_idx] += bump;
    return cross_entropy(forward(net, x).yhat, label);
}

}  // namespace

Matrix fd_layer_gradient(const MlpNetwork& net, const SampleBatch& batch, std::size_t layer,
                         double h) {
    const Matrix& w = net.layers()[layer].weight;
    Matrix out(w.rows(), w.cols());
    for (std::size_t idx = 0; idx < w.size(); ++idx) {
        MlpNetwork plus = net, minus = net;
        plus.layers()[layer].weight.data()[idx] += h;
        minus.layers()[layer].weight.data()[idx] -= h;
        out.data()[idx] = (batch_loss(plus, batch) - batch_loss(minus, batch)) / (2.0 * h);
    }
    return out;
}

Matrix fd_weight_block_hessian(const MlpNetwork& net, const Vector& x, std::size_t label,
                               std::size_t layer, double h) {
    const Matrix& w = net.layers()[layer].weight;
    const std::size_t rows = w.rows();
    const std::size_t cols = w.cols();
    const std::size_t n = rows * cols;
    // column-wise vec(W): flat index v = col * rows + row
    auto row_major = [&](std::size_t v) {
        const std::size_t col = v / rows;
        const std::size_t row = v % rows;
        return row * cols + col;
    };
    Matrix out(n, n);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t q = p; q < n; ++q) {
            const std::size_t ip = row_major(p);
            const std::size_t iq = row_major(q);
            double v;
            if (p == q) {
                const double f0 = sample_loss_perturbed(net, x, label, layer, ip, 0.0);
                const double fp = sample_loss_perturbed(net, x, label, layer, ip, h);
                const double fm = sample_loss_perturbed(net, x, label, layer, ip, -h);
                v = (fp - 2.0 * f0 + fm) / (h * h);
            } else {
                MlpNetwork npp = net, npm = net, nmp = net, nmm = net;
                npp.layers()[layer].weight.data()[ip] += h;
                npp.layers()[layer].weight.data()[iq] += h;
                npm.layers()[layer].weight.data()[ip] += h;
                npm.layers()[layer].weight.data()[iq] -= h;
                nmp.layers()[layer].weight.data()[ip] -= h;
                nmp.layers()[layer].weight.data()[iq] += h;
                nmm.layers()[layer].weight.data()[ip] -= h;
                nmm.layers()[layer].weight.data()[iq] -= h;
                v = (cross_entropy(forward(npp, x).yhat, label) -
                     cross_entropy(forward(npm, x).yhat, label) -
                     cross_entropy(forward(nmp, x).yhat, label) +
                     cross_entropy(forward(nmm, x).yhat, label)) /
                    (4.0 * h * h);
            }
            out(p, q) = v;
            out(q, p) = v;
        }
    return out;
}

Matrix fd_hessian_derivative(const Matrix& w, const Vector& phi, std::size_t label,
                             std::size_t wj, std::size_t wi, double h) {
    Matrix plus = w, minus = w;
    plus(wj, wi) += h;
    minus(wj, wi) -= h;
    const Vector yp = softmax(plus * phi);
    const Vector ym = softmax(minus * phi);
    return (penultimate_hessian(yp, phi) - penultimate_hessian(ym, phi)) * (1.0 / (2.0 * h));
}

FdCheckReport run_fd_check_suite(std::uint64_t seed) {
    FdCheckReport report;
    SeededRng rng(seed, 0xfdc0ULL);

    // 1. closed-form classifier Hessian vs central differences
    for (int rep = 0; rep < 5; ++rep) {
        const std::size_t k = 2 + rng.uniform_int(3);
        const std::size_t m = 2 + rng.uniform_int(4);
        Matrix w(k, m);
        for (auto& v : w.data()) v = rng.normal();
        Vector phi(m);
        for (auto& v : phi) v = rng.normal();
        const std::size_t y = rng.uniform_int(k);
        const Vector yhat = softmax(w * phi);
        const Matrix analytic = penultimate_hessian(yhat, phi);
        const Matrix fd = fd_classifier_hessian(w, phi, y, 1e-4);
        const double scale = std::max(analytic.max_abs(), 1e-8);
        report.max_rel_err_classifier_hessian = std::max(
            report.max_rel_err_classifier_hessian, (analytic - fd).max_abs() / scale);
    }

    // 2. all layer gradients vs central differences on a 4-4-3 net
    {
        MlpNetwork net = MlpNetwork::random({4, 4, 3}, rng.derive(1));
        SampleBatch batch;
        batch.inputs = Matrix(6, 4);
        SeededRng drng = rng.derive(2);
        for (auto& v : batch.inputs.data()) v = drng.uniform(-1.0, 1.0);
        for (std::size_t i = 0; i < 6; ++i) batch.labels.push_back(drng.uniform_int(3));
        auto [loss, grads] = loss_and_grad(net, batch);
        (void)loss;
        for (std::size_t l = 0; l < net.layers().size(); ++l) {
            const Matrix fd = fd_layer_gradient(net, batch, l, 1e-5);
            const double scale = std::max(fd.max_abs(), 1e-6);
            report.max_rel_err_layer_gradients = std::max(
                report.max_rel_err_layer_gradients, (grads.weight[l] - fd).max_abs() / scale);
        }
    }

    // 3. backprop weight blocks vs finite differences (non-kink samples only)
    {
        SeededRng nrng = rng.derive(3);
        for (int rep = 0; rep < 3; ++rep) {
            MlpNetwork net = MlpNetwork::random({3, 4, 4, 3}, nrng.derive(rep));
            Vector x(3);
            SeededRng xrng = nrng.derive(100 + rep);
            for (auto& v : x) v = xrng.uniform(-1.0, 1.0);
            const std::size_t y = xrng.uniform_int(3);
            const BackpropResult bp = hessian_backprop(net, x, y);
            if (bp.near_kink) {
                ++report.skipped_near_kink;
                continue;
            }
            for (std::size_t l = 0; l < net.layers().size(); ++l) {
                const Matrix fd = fd_weight_block_hessian(net, x, y, l, 1e-4);
                const double scale = std::max(fd.max_abs(), 1e-6);
                report.max_rel_err_backprop_blocks =
                    std::max(report.max_rel_err_backprop_blocks,
                             (bp.layers[l].weight_hessian - fd).max_abs() / scale);
            }
        }
    }

    // 4. third-derivative tensor vs finite differences of the Hessian
    {
        SeededRng trng = rng.derive(4);
        const std::size_t k = 3, m = 3;
        Matrix w(k, m);
        for (auto& v : w.data()) v = trng.normal();
        Vector phi(m);
        for (auto& v : phi) v = trng.normal();
        const Vector yhat = softmax(w * phi);
        const Tensor3 t = third_derivative_tensor(yhat, phi);
        const std::size_t n = k * m;
        double max_err = 0.0;
        double scale = std::max(t.max_abs(), 1e-6);
        for (std::size_t j = 0; j < k; ++j)
            for (std::size_t i = 0; i < m; ++i) {
                const Matrix fd = fd_hessian_derivative(w, phi, 0, j, i, 1e-5);
                for (std::size_t p = 0; p < n; ++p)
                    for (std::size_t q = 0; q < n; ++q)
                        max_err = std::max(max_err, std::fabs(t(p, q, j * m + i) - fd(p, q)));
            }
        report.max_rel_err_third_derivative = max_err / scale;
    }

    report.pass = report.max_rel_err_classifier_hessian < 1e-4 &&
                  report.max_rel_err_layer_gradients < 1e-4 &&
                  report.max_rel_err_backprop_blocks < 1e-3 &&
                  report.max_rel_err_third_derivative < 1e-3;
    return report;
}

}  // namespace sharplab

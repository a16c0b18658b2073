#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sharplab/curvature.hpp"
#include "sharplab/data.hpp"
#include "sharplab/fdcheck.hpp"
#include "sharplab/network.hpp"

using namespace sharplab;

namespace {

MlpNetwork single_layer(const Matrix& w) {
    return MlpNetwork({Layer{w, std::nullopt, Activation::identity}});
}

}  // namespace

TEST_CASE("logit_hessian: one-hot probabilities give the zero matrix") {
    const Matrix h = logit_hessian({1.0, 0.0, 0.0});
    CHECK(h.max_abs() == 0.0);
}

TEST_CASE("logit_hessian: uniform binary case is the centering matrix / 4") {
    const Matrix h = logit_hessian({0.5, 0.5});
    CHECK(h(0, 0) == doctest::Approx(0.25));
    CHECK(h(0, 1) == doctest::Approx(-0.25));
    CHECK(h(1, 0) == doctest::Approx(-0.25));
    CHECK(h(1, 1) == doctest::Approx(0.25));
}

TEST_CASE("logit_hessian: random simplex points are PSD with zero row sums") {
    SeededRng rng(40, 0);
    for (int rep = 0; rep < 20; ++rep) {
        const Vector p = oracles::random_simplex(rng, 4);
        const Matrix h = logit_hessian(p);
        CHECK(oracles::min_eigenvalue(h) >= -1e-12);
        for (std::size_t i = 0; i < 4; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < 4; ++j) row += h(i, j);
            CHECK(std::abs(row) < 1e-14);
        }
    }
}

TEST_CASE("logit_hessian: non-simplex input rejected") {
    CHECK_THROWS_AS(logit_hessian({0.7, 0.7}), std::invalid_argument);
}

TEST_CASE("penultimate_hessian: trace example and PSD") {
    const Matrix h = penultimate_hessian({0.5, 0.5}, {1.0, 0.0});
    CHECK(h.rows() == 4);
    CHECK(h.trace() == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(oracles::min_eigenvalue(h) >= -1e-10);
    CHECK(penultimate_hessian({1.0, 0.0}, {1.0, 0.0}).max_abs() == 0.0);
}

TEST_CASE("penultimate_hessian: matches finite differences of the loss") {
    SeededRng rng(41, 0);
    for (int rep = 0; rep < 5; ++rep) {
        const Matrix w = oracles::random_matrix(rng, 3, 4);
        const Vector phi{0.4, -0.2, 0.7, 0.1};
        const Vector yhat = softmax(w * phi);
        const Matrix analytic = penultimate_hessian(yhat, phi);
        const Matrix fd = fd_classifier_hessian(w, phi, 1, 1e-4);
        CHECK(oracles::rel_err(analytic, fd) < 1e-4);
    }
}

TEST_CASE("relative_sharpness: closed form agrees with the assembled trace") {
    SeededRng rng(42, 0);
    const Matrix w = oracles::random_matrix(rng, 3, 5);
    MlpNetwork net = single_layer(w);
    SampleBatch batch;
    batch.inputs = oracles::random_matrix(rng, 10, 5, 0.5);
    batch.labels = {0, 1, 2, 0, 1, 2, 0, 1, 2, 0};
    const SharpnessReport report = relative_sharpness(net, batch);
    const double w_spec = spectral_norm(w);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const ForwardCache cache = forward(net, batch.input(i));
        const double assembled = penultimate_hessian(cache.yhat, cache.phi).trace();
        const double want = w_spec * assembled;
        CHECK(std::abs(report.per_sample[i].kappa_spectral - want) <=
              1e-10 * std::max(1.0, std::abs(want)));
        CHECK(report.per_sample[i].kappa_spectral >= 0.0);
        CHECK(report.per_sample[i].kappa_frobenius >= 0.0);
    }
}

TEST_CASE("relative_sharpness: fully confident samples have zero sharpness") {
    Matrix w(2, 2);
    w(0, 0) = 2000.0;
    w(1, 1) = -2000.0;
    MlpNetwork net = single_layer(w);
    SampleBatch batch;
    batch.inputs = Matrix(1, 2, Vector{1.0, 1.0});
    batch.labels = {0};
    CHECK(relative_sharpness(net, batch).per_sample[0].kappa_spectral == 0.0);
}

TEST_CASE("relative_sharpness: worked binary example gives 1/2") {
    // equal logits, phi = (1, 0), spectral norm passed as 1
    MlpNetwork net = single_layer(Matrix(2, 2));
    const SharpnessRecord rec = sample_sharpness(net, {1.0, 0.0}, 0, 0, 1.0, 1.0);
    CHECK(rec.kappa_spectral == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(rec.confidence == doctest::Approx(0.5));
}

TEST_CASE("third_derivative_tensor: one-hot and balanced binary cases vanish") {
    CHECK(third_derivative_tensor({1.0, 0.0}, {1.0}).max_abs() == 0.0);
    // at yhat = (1/2, 1/2), m = 1 every entry cancels exactly:
    // d/dz [y(1-y)] = (1-2y) y(1-y) = 0 and d/dz [-y0 y1] = 0
    CHECK(third_derivative_tensor({0.5, 0.5}, {1.0}).max_abs() < 1e-15);
}

TEST_CASE("third_derivative_tensor: matches finite differences of the Hessian") {
    SeededRng rng(43, 0);
    const Matrix w = oracles::random_matrix(rng, 3, 4);
    const Vector phi{0.3, -0.5, 0.2, 0.8};
    const Vector yhat = softmax(w * phi);
    const Tensor3 t = third_derivative_tensor(yhat, phi);
    const std::size_t km = 12;
    double max_err = 0.0;
    for (std::size_t v = 0; v < km; ++v) {
        const Matrix fd = fd_hessian_derivative(w, phi, 1, v / 4, v % 4, 1e-4);
        for (std::size_t i = 0; i < km; ++i)
            for (std::size_t j = 0; j < km; ++j) {
                const double want = fd(i, j);
                const double got = t(i, j, v);
                max_err = std::max(max_err,
                                   std::abs(got - want) / std::max(1.0, std::abs(want)));
            }
    }
    CHECK(max_err < 1e-3);
}

TEST_CASE("third_derivative_tensor: entries obey the (1/4) k m Lp^3 bound") {
    SeededRng rng(44, 0);
    for (int rep = 0; rep < 10; ++rep) {
        const std::size_t k = 2 + rng.uniform_int(3);
        const std::size_t m = 1 + rng.uniform_int(4);
        const Vector p = oracles::random_simplex(rng, k);
        Vector phi(m);
        for (auto& v : phi) v = rng.normal();
        double lp = 0.0;
        for (double v : phi) lp = std::max(lp, std::abs(v));
        const double bound = 0.25 * double(k) * double(m) * lp * lp * lp;
        CHECK(third_derivative_tensor(p, phi).max_abs() <= bound + 1e-12);
    }
}

TEST_CASE("hessian_backprop: single linear layer reproduces the base case") {
    SeededRng rng(45, 0);
    const Matrix w = oracles::random_matrix(rng, 3, 4);
    MlpNetwork net = single_layer(w);
    const Vector x{0.2, 0.5, -0.1, 0.4};
    const BackpropResult bp = hessian_backprop(net, x, 1);
    const Matrix hl = logit_hessian(forward(net, x).yhat);
    const Matrix want = kron(Matrix::outer(x), hl);  // column-wise vec convention
    CHECK(oracles::rel_err(bp.layers[0].weight_hessian, want) < 1e-14);
}

TEST_CASE("hessian_backprop: saturated softmax collapses every block to zero") {
    // a hand-built net whose features are alive at x, then a classifier
    // scaled until the softmax saturates to an exact one-hot, which makes
    // the starting logit Hessian exactly zero
    SeededRng rng(46, 0);
    Matrix w1(6, 2);
    for (auto& v : w1.data()) v = std::abs(rng.normal());  // positive: x > 0 stays alive
    const Matrix w2 = oracles::random_matrix(rng, 3, 6);
    MlpNetwork net({Layer{w1, std::nullopt, Activation::relu},
                    Layer{w2, std::nullopt, Activation::identity}});
    const Vector x{0.9, 0.1};
    REQUIRE(norm2(net.features(x)) > 0.0);
    MlpNetwork sat = scale_penultimate(net, 1e8);
    const ForwardCache cache = forward(sat, x);
    REQUIRE(logit_hessian(cache.yhat).max_abs() == 0.0);
    const BackpropResult bp = hessian_backprop(sat, x, 0);
    for (const auto& lc : bp.layers) {
        CHECK(lc.activation_hessian.max_abs() == 0.0);
        CHECK(lc.weight_hessian.max_abs() == 0.0);
    }
}

TEST_CASE("hessian_backprop: blocks match finite differences on a 3-layer net") {
    MlpNetwork net = MlpNetwork::random({4, 6, 5, 3}, SeededRng(47, 0));
    SeededRng rng(48, 0);
    std::size_t checked = 0;
    for (int rep = 0; rep < 8 && checked < 3; ++rep) {
        Vector x(4);
        for (auto& v : x) v = rng.normal();
        const BackpropResult bp = hessian_backprop(net, x, rep % 3);
        if (bp.near_kink) continue;
        ++checked;
        for (std::size_t l = 0; l < net.layers().size(); ++l) {
            const Matrix fd = fd_weight_block_hessian(net, x, rep % 3, l, 1e-4);
            CHECK(oracles::rel_err(bp.layers[l].weight_hessian, fd) < 1e-3);
        }
    }
    CHECK(checked >= 3);
}

TEST_CASE("hessian_backprop: classifier block equals the closed form") {
    MlpNetwork net = MlpNetwork::random({3, 7, 4}, SeededRng(49, 0));
    const Vector x{0.4, -0.3, 0.8};
    const BackpropResult bp = hessian_backprop(net, x, 2);
    const ForwardCache cache = forward(net, x);
    const Matrix closed = penultimate_hessian(cache.yhat, cache.phi);  // row-major vec
    const std::size_t m = net.feature_dim();
    const std::size_t k = net.num_classes();
    // backprop block uses column-wise vec; commute to the row-major layout
    const Matrix commuted = commute_kron_order(bp.layers.back().weight_hessian, m, k);
    CHECK(oracles::rel_err(commuted, closed) < 1e-10);
}

TEST_CASE("hessian_backprop: flags samples near a ReLU kink") {
    Matrix w1 = Matrix::identity(2);  // pre-activation equals the input
    SeededRng rng(50, 0);
    Matrix w2 = oracles::random_matrix(rng, 2, 2);
    MlpNetwork net({Layer{w1, std::nullopt, Activation::relu},
                    Layer{w2, std::nullopt, Activation::identity}});
    CHECK(hessian_backprop(net, {0.0, 0.5}, 0).near_kink);
    CHECK_FALSE(hessian_backprop(net, {0.3, 0.5}, 0).near_kink);
}

TEST_CASE("hutchinson_trace: exact on identity, zero on the zero operator") {
    auto id = [](const Vector& z) { return z; };
    CHECK(hutchinson_trace(id, 17, 3, SeededRng(51, 0)) == doctest::Approx(17.0));
    auto zero = [](const Vector& z) { return Vector(z.size(), 0.0); };
    CHECK(hutchinson_trace(zero, 17, 3, SeededRng(51, 1)) == 0.0);
}

TEST_CASE("hutchinson_trace: 5% relative error on random PSD matrices") {
    SeededRng rng(52, 0);
    const Matrix a = oracles::random_matrix(rng, 64, 64);
    const Matrix psd = a.transpose() * a;
    auto hvp = [&](const Vector& z) { return psd * z; };
    const double est = hutchinson_trace(hvp, 64, 1000, SeededRng(52, 1));
    CHECK(std::abs(est - psd.trace()) / psd.trace() < 0.05);
}

TEST_CASE("hutchinson_trace: non-finite operator output rejected") {
    auto bad = [](const Vector& z) { return Vector(z.size(), std::nan("")); };
    CHECK_THROWS_AS(hutchinson_trace(bad, 4, 2, SeededRng(53, 0)), std::runtime_error);
}

TEST_CASE("loss_curvature_terms: analytic values per family") {
    const Vector p{0.5, 0.3, 0.2};
    SUBCASE("cross-entropy and hard KL: 1/p_y^2 on the true class only") {
        for (auto kind : {LossKind::ce(), LossKind::kl_hard()}) {
            const CurvatureTerms t = loss_curvature_terms(kind, p, 0);
            CHECK(t.h_true == doctest::Approx(4.0).epsilon(1e-12));
            CHECK(t.h_other[1] == 0.0);
            CHECK(t.h_other[2] == 0.0);
            CHECK(t.assumption_a_ok);
        }
    }
    SUBCASE("brier: constant 2 everywhere") {
        const CurvatureTerms t = loss_curvature_terms(LossKind::brier(), p, 1);
        CHECK(t.h_true == doctest::Approx(2.0));
        for (double h : t.h_other) CHECK(h == doctest::Approx(2.0));
        CHECK(t.assumption_a_ok);
    }
    SUBCASE("soft KL: q_i / p_i^2, bounded-curvature condition violated") {
        const CurvatureTerms t =
            loss_curvature_terms(LossKind::kl_soft({0.5, 0.5, 0.0}), p, 0);
        CHECK(t.h_true == doctest::Approx(0.5 / 0.25).epsilon(1e-12));
        CHECK(t.h_other[1] == doctest::Approx(0.5 / 0.09).epsilon(1e-12));
        CHECK_FALSE(t.assumption_a_ok);
    }
    SUBCASE("soft KL with a one-hot target satisfies the condition") {
        const CurvatureTerms t =
            loss_curvature_terms(LossKind::kl_soft({1.0, 0.0, 0.0}), p, 0);
        CHECK(t.assumption_a_ok);
    }
    SUBCASE("focal: gamma >= 1 keeps curvature bounded") {
        CHECK(loss_curvature_terms(LossKind::focal_loss(2.0), p, 0).assumption_a_ok);
        CHECK_FALSE(loss_curvature_terms(LossKind::focal_loss(0.5), p, 0).assumption_a_ok);
    }
    SUBCASE("boundary points rejected") {
        CHECK_THROWS_AS(loss_curvature_terms(LossKind::ce(), {1.0, 0.0, 0.0}, 0),
                        std::invalid_argument);
    }
}

TEST_CASE("loss_curvature_terms: finite-difference agreement in probability space") {
    // central second differences of the scalar losses, coordinates free
    auto fd2 = [](auto loss, Vector p, std::size_t i) {
        const double h = 1e-5;
        Vector pp = p, pm = p;
        pp[i] += h;
        pm[i] -= h;
        return (loss(pp) - 2.0 * loss(p) + loss(pm)) / (h * h);
    };
    const Vector p{0.5, 0.3, 0.2};
    const std::size_t y = 0;

    auto ce = [&](const Vector& q) { return -std::log(q[y]); };
    CHECK(loss_curvature_terms(LossKind::ce(), p, y).h_true ==
          doctest::Approx(fd2(ce, p, y)).epsilon(1e-5));

    const double gamma = 2.0;
    auto focal = [&](const Vector& q) {
        return -std::pow(1.0 - q[y], gamma) * std::log(q[y]);
    };
    CHECK(loss_curvature_terms(LossKind::focal_loss(gamma), p, y).h_true ==
          doctest::Approx(fd2(focal, p, y)).epsilon(1e-4));

    auto brier = [&](const Vector& q) {
        double s = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) {
            const double d = q[i] - (i == y ? 1.0 : 0.0);
            s += d * d;
        }
        return s;
    };
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(loss_curvature_terms(LossKind::brier(), p, y).h_other[i] ==
              doctest::Approx(fd2(brier, p, i)).epsilon(1e-5));

    const Vector qsoft{0.6, 0.3, 0.1};
    auto kls = [&](const Vector& q) {
        double s = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) s += qsoft[i] * std::log(qsoft[i] / q[i]);
        return s;
    };
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(loss_curvature_terms(LossKind::kl_soft(qsoft), p, y).h_other[i] ==
              doctest::Approx(fd2(kls, p, i)).epsilon(1e-4));
}

TEST_CASE("collapse_curve: alpha = 1 reproduces the unscaled sharpness") {
    MlpNetwork net = MlpNetwork::random({2, 8, 3}, SeededRng(54, 0));
    SeededRng rng(55, 0);
    SampleBatch batch;
    batch.inputs = oracles::random_matrix(rng, 20, 2, 0.5);
    batch.labels.resize(20);
    for (std::size_t i = 0; i < 20; ++i) batch.labels[i] = predict(net, batch.input(i));
    const CollapseCurve curve = collapse_curve(net, batch, {1.0, 2.0, 4.0, 8.0});
    REQUIRE(curve.samples.size() == 20);
    const SharpnessReport report = relative_sharpness(net, batch);
    for (std::size_t i = 0; i < 20; ++i)
        CHECK(curve.samples[i].kappa_spectral[0] ==
              doctest::Approx(report.per_sample[i].kappa_spectral).epsilon(1e-12));
}

TEST_CASE("collapse_curve: exponential envelope holds and misclassified are excluded") {
    MlpNetwork net = MlpNetwork::random({2, 8, 3}, SeededRng(56, 0));
    SeededRng rng(57, 0);
    SampleBatch batch;
    batch.inputs = oracles::random_matrix(rng, 30, 2, 0.5);
    batch.labels.resize(30);
    for (std::size_t i = 0; i < 30; ++i) {
        const std::size_t pred = predict(net, batch.input(i));
        batch.labels[i] = i % 5 == 0 ? (pred + 1) % 3 : pred;  // plant wrong labels
    }
    const std::vector<double> alphas{1, 2, 4, 8};
    const CollapseCurve curve = collapse_curve(net, batch, alphas);
    CHECK(curve.excluded_nonpositive_margin == 6);
    CHECK(curve.samples.size() == 24);
    for (const auto& s : curve.samples) {
        CHECK(s.margin > 0.0);
        for (std::size_t a = 0; a < alphas.size(); ++a)
            CHECK(s.trace[a] <= 2.0 * 2.0 * std::exp(-alphas[a] * s.margin) + 1e-12);
    }
}

TEST_CASE("confidence collapse: Frobenius norm of the logit Hessian is O(1 - p_y)") {
    // sweep confidence upward along a fixed logit direction; the ratio
    // ||H||_F / (1 - p_y) must stay bounded
    double worst = 0.0;
    for (double t = 0.0; t < 30.0; t += 0.5) {
        const Vector yhat = softmax({t, 0.0, -0.3});
        const double ratio = logit_hessian(yhat).frobenius_norm() / (1.0 - yhat[0] + 1e-300);
        worst = std::max(worst, ratio);
    }
    CHECK(worst < 4.0);
}

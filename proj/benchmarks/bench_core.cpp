// Microbenchmarks for the hot paths: Kronecker assembly, the closed-form
// classifier Hessian, second-order backprop, spectral norms, the cubic
// certificate root, Hutchinson probing, and a single PGD attack.

#include <benchmark/benchmark.h>

#include "sharplab/cubic.hpp"
#include "sharplab/curvature.hpp"
#include "sharplab/matrix.hpp"
#include "sharplab/network.hpp"
#include "sharplab/robustness.hpp"

using namespace sharplab;

namespace {

Matrix random_matrix(SeededRng& rng, std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) m(i, j) = rng.normal();
    return m;
}

Vector random_vector(SeededRng& rng, std::size_t n) {
    Vector v(n);
    for (auto& x : v) x = rng.normal();
    return v;
}

void bm_kron(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    SeededRng rng(1, 0);
    const Matrix a = random_matrix(rng, n, n);
    const Matrix b = random_matrix(rng, n, n);
    for (auto _ : state) benchmark::DoNotOptimize(kron(a, b));
}
BENCHMARK(bm_kron)->Arg(4)->Arg(8)->Arg(16);

void bm_penultimate_hessian(benchmark::State& state) {
    const std::size_t m = static_cast<std::size_t>(state.range(0));
    SeededRng rng(2, 0);
    const Vector yhat = softmax(random_vector(rng, 10));
    const Vector phi = random_vector(rng, m);
    for (auto _ : state) benchmark::DoNotOptimize(penultimate_hessian(yhat, phi));
}
BENCHMARK(bm_penultimate_hessian)->Arg(16)->Arg(32)->Arg(64);

void bm_hessian_backprop(benchmark::State& state) {
    MlpNetwork net = MlpNetwork::random({8, 16, 16, 4}, SeededRng(3, 0));
    SeededRng rng(3, 1);
    const Vector x = random_vector(rng, 8);
    for (auto _ : state) benchmark::DoNotOptimize(hessian_backprop(net, x, 0));
}
BENCHMARK(bm_hessian_backprop);

void bm_spectral_norm(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    SeededRng rng(4, 0);
    const Matrix a = random_matrix(rng, n, n);
    for (auto _ : state) benchmark::DoNotOptimize(spectral_norm(a));
}
BENCHMARK(bm_spectral_norm)->Arg(16)->Arg(64);

void bm_cubic_root(benchmark::State& state) {
    const CubicProblem p{0.7, 0.04, 0.1};
    for (auto _ : state) benchmark::DoNotOptimize(unique_positive_cubic_root(p));
}
BENCHMARK(bm_cubic_root);

void bm_hutchinson(benchmark::State& state) {
    const std::size_t dim = 64;
    SeededRng rng(5, 0);
    const Matrix a = random_matrix(rng, dim, dim);
    const Matrix psd = a.transpose() * a;
    auto hvp = [&](const Vector& z) { return psd * z; };
    for (auto _ : state)
        benchmark::DoNotOptimize(hutchinson_trace(hvp, dim, 100, SeededRng(5, 1)));
}
BENCHMARK(bm_hutchinson);

void bm_pgd_attack_one(benchmark::State& state) {
    MlpNetwork net = MlpNetwork::random({4, 16, 16, 3}, SeededRng(6, 0));
    SeededRng rng(6, 1);
    const Vector x{0.4, 0.1, 0.7, 0.3};
    AttackConfig atk;
    atk.norm = AttackNorm::linf;
    atk.epsilon = 0.1;
    atk.step_size = 0.02;
    atk.steps = 20;
    for (auto _ : state) benchmark::DoNotOptimize(pgd_attack_one(net, x, 0, 0, atk));
}
BENCHMARK(bm_pgd_attack_one);

}  // namespace

BENCHMARK_MAIN();

// Parallel kernels vs their serial reference twins, at head-sized shapes.
#include <benchmark/benchmark.h>

#include <random>

#include "fadi/kernels.hpp"
#include "fadi/random.hpp"

namespace {

using fadi::Matrix;
namespace k = fadi::kernels;
namespace ref = fadi::kernels::reference;

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
    fadi::Rng rng = fadi::make_rng(seed, 0xbe);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    Matrix m(r, c);
    for (double& v : m.flat()) v = d(rng);
    return m;
}

// args: out, in, batch
template <bool Parallel>
void BM_Affine(benchmark::State& st) {
    const auto out = static_cast<std::size_t>(st.range(0)), in = static_cast<std::size_t>(st.range(1)),
               n = static_cast<std::size_t>(st.range(2));
    const Matrix w = random_matrix(out, in, 1), b = random_matrix(out, 1, 2), x = random_matrix(in, n, 3);
    Matrix y;
    for (auto _ : st) {
        if constexpr (Parallel) k::affine(w, b, x, y);
        else ref::affine(w, b, x, y);
        benchmark::DoNotOptimize(y.flat().data());
    }
    st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(n));
}

template <bool Parallel>
void BM_AffineWeightGrad(benchmark::State& st) {
    const auto out = static_cast<std::size_t>(st.range(0)), in = static_cast<std::size_t>(st.range(1)),
               n = static_cast<std::size_t>(st.range(2));
    const Matrix dy = random_matrix(out, n, 4), x = random_matrix(in, n, 5);
    Matrix dw, db;
    for (auto _ : st) {
        if constexpr (Parallel) k::affine_weight_grad(dy, x, dw, db);
        else ref::affine_weight_grad(dy, x, dw, db);
        benchmark::DoNotOptimize(dw.flat().data());
    }
    st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(n));
}

// args: classes, dim, batch
template <bool Parallel>
void BM_CosineLogits(benchmark::State& st) {
    const auto c = static_cast<std::size_t>(st.range(0)), d = static_cast<std::size_t>(st.range(1)),
               n = static_cast<std::size_t>(st.range(2));
    const Matrix w = random_matrix(c, d, 6), x = random_matrix(d, n, 7);
    Matrix p;
    for (auto _ : st) {
        if constexpr (Parallel) k::cosine_logits(w, 20.0, x, p);
        else ref::cosine_logits(w, 20.0, x, p);
        benchmark::DoNotOptimize(p.flat().data());
    }
    st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(n));
}

template <bool Parallel>
void BM_CosineBackward(benchmark::State& st) {
    const auto c = static_cast<std::size_t>(st.range(0)), d = static_cast<std::size_t>(st.range(1)),
               n = static_cast<std::size_t>(st.range(2));
    const Matrix w = random_matrix(c, d, 8), x = random_matrix(d, n, 9), dp = random_matrix(c, n, 10);
    Matrix dw, dx;
    for (auto _ : st) {
        if constexpr (Parallel) k::cosine_backward(w, 20.0, x, dp, dw, dx);
        else ref::cosine_backward(w, 20.0, x, dp, dw, dx);
        benchmark::DoNotOptimize(dw.flat().data());
    }
    st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(n));
}

void affine_shapes(benchmark::internal::Benchmark* b) {
    b->Args({32, 32, 32})->Args({256, 256, 512})->Args({1024, 1024, 512});
}

void cosine_shapes(benchmark::internal::Benchmark* b) {
    b->Args({10, 32, 32})->Args({21, 1024, 512})->Args({81, 1024, 2048});
}

}  // namespace

BENCHMARK(BM_Affine<true>)->Name("affine/omp")->Apply(affine_shapes)->UseRealTime();
BENCHMARK(BM_Affine<false>)->Name("affine/reference")->Apply(affine_shapes)->UseRealTime();
BENCHMARK(BM_AffineWeightGrad<true>)->Name("affine_weight_grad/omp")->Apply(affine_shapes)->UseRealTime();
BENCHMARK(BM_AffineWeightGrad<false>)->Name("affine_weight_grad/reference")->Apply(affine_shapes)->UseRealTime();
BENCHMARK(BM_CosineLogits<true>)->Name("cosine_logits/omp")->Apply(cosine_shapes)->UseRealTime();
BENCHMARK(BM_CosineLogits<false>)->Name("cosine_logits/reference")->Apply(cosine_shapes)->UseRealTime();
BENCHMARK(BM_CosineBackward<true>)->Name("cosine_backward/omp")->Apply(cosine_shapes)->UseRealTime();
BENCHMARK(BM_CosineBackward<false>)->Name("cosine_backward/reference")->Apply(cosine_shapes)->UseRealTime();

BENCHMARK_MAIN();

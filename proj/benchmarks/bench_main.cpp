#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "lal/classifiers.hpp"
#include "lal/dataset.hpp"
#include "lal/npmodel.hpp"
#include "lal/oracle.hpp"

namespace {

lal::Dataset blobs(std::size_t n, std::size_t dim) {
  const std::vector<std::size_t> counts{n / 2, n - n / 2};
  return lal::generate_gaussian_mixture(counts, lal::diagonal_means(dim, 2.0), 1.0, 7);
}

std::vector<std::size_t> iota(std::size_t from, std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), from);
  return v;
}

void BM_FitLogistic(benchmark::State& state) {
  const auto ds = blobs(static_cast<std::size_t>(state.range(0)), 10);
  const std::vector<double> w(ds.size(), 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(lal::fit_logistic(ds.features, ds.labels, w, 2));
}
BENCHMARK(BM_FitLogistic)->Arg(20)->Arg(100)->Arg(400);

void BM_FitSvm(benchmark::State& state) {
  const auto ds = blobs(static_cast<std::size_t>(state.range(0)), 10);
  const std::vector<double> w(ds.size(), 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(lal::fit_svm_rbf(ds.features, ds.labels, w, 2));
}
BENCHMARK(BM_FitSvm)->Arg(20)->Arg(100)->Arg(400);

void BM_OracleScores(benchmark::State& state) {
  const auto pool_size = static_cast<std::size_t>(state.range(0));
  const auto ds = blobs(10 + pool_size + 200, 10);
  const auto annotated = ds.labeled(iota(0, 10));
  const auto pool = ds.labeled(iota(10, pool_size));
  const auto eval = ds.subset(iota(10 + pool_size, 200));
  const lal::Trainer trainer({}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(lal::oracle_scores(annotated, pool, trainer, eval));
}
BENCHMARK(BM_OracleScores)->Arg(50)->Arg(200);

void BM_NPForward(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const auto params = lal::init_np(21, {}, 3);
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-1, 1);
  lal::Matrix context(n, 21), targets(2 * n, 21);
  for (Eigen::Index i = 0; i < context.size(); ++i) context.data()[i] = u(gen);
  for (Eigen::Index i = 0; i < targets.size(); ++i) targets.data()[i] = u(gen);
  for (auto _ : state) benchmark::DoNotOptimize(lal::np_forward(params, context, targets));
}
BENCHMARK(BM_NPForward)->Arg(10)->Arg(50);

void BM_NPForwardBackward(benchmark::State& state) {
  namespace ad = lal::ad;
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t batch = 8, dim = 21;
  auto params = lal::init_np(dim, {}, 3);
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> u(-1, 1);
  auto fill = [&](ad::Shape shape) {
    std::vector<double> v(ad::shape_size(shape));
    for (auto& x : v) x = u(gen);
    return ad::Tensor::constant(std::move(shape), std::move(v));
  };
  const auto context = fill({batch, n, dim});
  const auto labels = ad::Tensor::constant({batch, n, 1}, std::vector<double>(batch * n, 0.0));
  const auto targets = fill({batch, 2 * n, dim});
  const auto y = fill({batch, 2 * n, 1});
  for (auto _ : state) {
    const auto f = lal::np_forward_batch(params, context, labels, targets);
    ad::backward(lal::gaussian_nll(f.mu, f.sigma, y));
  }
}
BENCHMARK(BM_NPForwardBackward)->Arg(10)->Arg(50);

}  // namespace
BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include <vector>

#include "snrprobe/kernels.hpp"
#include "snrprobe/random.hpp"

using namespace snrprobe;

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  SeededStream rng(seed);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

template <Matrix (*F)(const Matrix&)>
void bm_unary(benchmark::State& state) {
  kernels::set_num_threads(static_cast<int>(state.range(1)));
  const Matrix x = random_matrix(state.range(0), 256, 1);
  for (auto _ : state) benchmark::DoNotOptimize(F(x));
}

template <Matrix (*F)(const Matrix&, const Matrix&)>
void bm_cross(benchmark::State& state) {
  kernels::set_num_threads(static_cast<int>(state.range(1)));
  const Matrix a = random_matrix(state.range(0), 128, 2), b = random_matrix(state.range(0), 128, 3);
  for (auto _ : state) benchmark::DoNotOptimize(F(a, b));
}

template <std::vector<double> (*F)(std::span<const double>, std::span<const std::size_t>, std::size_t)>
void bm_mean(benchmark::State& state) {
  kernels::set_num_threads(static_cast<int>(state.range(1)));
  const std::vector<std::size_t> shape{static_cast<std::size_t>(state.range(0)), 64, 64};
  std::vector<double> data(shape[0] * shape[1] * shape[2]);
  SeededStream rng(4);
  for (double& v : data) v = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(F(data, shape, 0));
}

void args(benchmark::internal::Benchmark* b) {
  for (int n : {64, 256})
    for (int t : {1, 4}) b->Args({n, t});
}

}  // namespace

BENCHMARK(bm_unary<kernels::serial::pairwise_sq_dists>)->Name("pairwise_sq_dists/serial")->Apply(args);
BENCHMARK(bm_unary<kernels::omp::pairwise_sq_dists>)->Name("pairwise_sq_dists/omp")->Apply(args);
BENCHMARK(bm_unary<kernels::serial::gram_rows>)->Name("gram_rows/serial")->Apply(args);
BENCHMARK(bm_unary<kernels::omp::gram_rows>)->Name("gram_rows/omp")->Apply(args);
BENCHMARK(bm_cross<kernels::serial::cross_columns>)->Name("cross_columns/serial")->Apply(args);
BENCHMARK(bm_cross<kernels::omp::cross_columns>)->Name("cross_columns/omp")->Apply(args);
BENCHMARK(bm_mean<kernels::serial::mean_over_axis>)->Name("mean_over_axis/serial")->Apply(args);
BENCHMARK(bm_mean<kernels::omp::mean_over_axis>)->Name("mean_over_axis/omp")->Apply(args);

BENCHMARK_MAIN();

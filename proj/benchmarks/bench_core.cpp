#include <benchmark/benchmark.h>

#include <random>

#include "mfresnet/datagen.hpp"
#include "mfresnet/divergence.hpp"
#include "mfresnet/dynamics.hpp"
#include "mfresnet/gram.hpp"
#include "mfresnet/nnmodel.hpp"
#include "mfresnet/rademacher.hpp"
#include "mfresnet/rng.hpp"

using namespace mfresnet;

namespace {

// Two-spirals width used for the test-error experiments.
ScaledResNet spiral_net(int L, int width) {
  Rng rng(1);
  return init_gaussian({2, L, width, width, 1.0, 10.0, Activation::Tanh}, rng, false);
}

void BM_Forward(benchmark::State& state) {
  const ScaledResNet net = spiral_net(static_cast<int>(state.range(0)), 20);
  const Eigen::Vector2d x(0.3, -0.4);
  for (auto _ : state) benchmark::DoNotOptimize(predict(net, x));
}
BENCHMARK(BM_Forward)->Arg(10)->Arg(40);

void BM_FunctionalGradients(benchmark::State& state) {
  const ScaledResNet net = spiral_net(10, 20);
  const auto data = two_spirals(static_cast<int>(state.range(0)), 0.0, 3);
  for (auto _ : state) benchmark::DoNotOptimize(functional_gradients(net, data).flat().data());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FunctionalGradients)->Arg(32)->Arg(256)->Arg(1024);

void BM_GramReport(benchmark::State& state) {
  const auto data = random_unit_dataset(static_cast<int>(state.range(0)), 3, 5);
  Rng rng(2);
  const ScaledResNet net = init_gaussian({3, 4, 16, 16, 1.0, 1.0, Activation::Tanh}, rng, false);
  for (auto _ : state) benchmark::DoNotOptimize(gram_report(net, data).lambda_min_G2);
}
BENCHMARK(BM_GramReport)->Arg(16)->Arg(64);

void BM_HungarianW2(benchmark::State& state) {
  Rng rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  const int m = static_cast<int>(state.range(0));
  Cloud a, b;
  for (int i = 0; i < m; ++i) {
    a.push_back(Eigen::VectorXd::NullaryExpr(5, [&] { return g(rng); }));
    b.push_back(Eigen::VectorXd::NullaryExpr(5, [&] { return g(rng); }));
  }
  for (auto _ : state) benchmark::DoNotOptimize(w2_clouds(a, b));
}
BENCHMARK(BM_HungarianW2)->Arg(20)->Arg(100)->Arg(400);

void BM_Rademacher(benchmark::State& state) {
  const Eigen::MatrixXd F = Eigen::MatrixXd::Random(5, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(empirical_rademacher(F, 200, 7).mean);
}
BENCHMARK(BM_Rademacher)->Arg(128)->Arg(1024);

void BM_HermiteBound(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(hermite_lower_bound(32, 0.9, Activation::Tanh).Lambda);
}
BENCHMARK(BM_HermiteBound);

}  // namespace
BENCHMARK_MAIN();

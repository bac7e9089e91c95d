#include <benchmark/benchmark.h>

#include <random>

#include "dnglab/guidance.hpp"
#include "dnglab/mixture.hpp"
#include "dnglab/reference.hpp"
#include "dnglab/sampler.hpp"

using namespace dnglab;

namespace {

GaussianMixture random_mixture(std::size_t k, std::size_t dim) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> loc(-5.0, 5.0);
  std::vector<Vector> mu(k, Vector(dim));
  for (auto& m : mu) {
    for (double& v : m) v = loc(rng);
  }
  return GaussianMixture(std::vector<double>(k, 1.0 / static_cast<double>(k)), std::move(mu),
                         std::vector<double>(k, 0.3));
}

void BM_Score(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const auto dim = static_cast<std::size_t>(state.range(1));
  const auto g = diffuse_mixture(random_mixture(k, dim), 0.5);
  Vector x(dim, 0.1), out(dim);
  for (auto _ : state) {
    score_into(g, x, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Score)->ArgsProduct({{3, 10, 100}, {1, 2, 16}});

void BM_ExactPosterior(benchmark::State& state) {
  const auto split = reference::class_removal_mixture();
  const double x[1] = {-17.0};
  for (auto _ : state) benchmark::DoNotOptimize(exact_posterior(split, x, 0.3));
}
BENCHMARK(BM_ExactPosterior);

void BM_PosteriorUpdate(benchmark::State& state) {
  auto st = PosteriorState::initial(0.1, 1e-6, 0.999);
  const Vector x(64, 0.2), mu_u(64, 0.1), mu_f(64, 0.3);
  for (auto _ : state) {
    st = update_posterior(st, x, mu_u, mu_f, 0.01, 0.25, 0.0);
    benchmark::DoNotOptimize(st.log_p);
  }
}
BENCHMARK(BM_PosteriorUpdate);

void BM_Chain(benchmark::State& state) {
  GuidanceConfig g;
  g.scheme = static_cast<Scheme>(state.range(0));
  g.lambda0 = 1.0;
  if (g.scheme == Scheme::SLD) g.sld = SldConfig{};
  const Sampler sampler(RunConfig{reference::class_removal_mixture(), NoiseSchedule::linear(1000, 1e-4, 0.02), g,
                                  1, 7, false});
  std::size_t chain = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sampler.run_chain(chain++).x0.data());
  state.SetLabel(std::string(to_string(g.scheme)));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_Chain)->DenseRange(0, 5)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

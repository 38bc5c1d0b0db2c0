#include <benchmark/benchmark.h>

#include "catgraph/dpcluster.hpp"
#include "catgraph/loglinear.hpp"
#include "catgraph/search.hpp"
#include "catgraph/simulate.hpp"
#include "catgraph/tgamma.hpp"

using namespace catgraph;

namespace {

CategoricalDataset preset_data(const char* name, std::size_t n) {
  auto spec = builtin_spec(name);
  spec.n = n;
  return generate(spec);
}

void BM_GibbsSweep(benchmark::State& state) {
  const auto data = preset_data("sim1-scaled", static_cast<std::size_t>(state.range(0)));
  DpSampler sampler(data, marginals(data), PriorConfig{});
  Rng rng(1);
  auto s = sampler.initial_state(rng);
  for (auto _ : state) sampler.sweep(s, rng);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GibbsSweep)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_LaplaceFit(benchmark::State& state) {
  const auto table = build_table(preset_data("sim1-scaled", 5000));
  const LogLinearModel model(parse_model(state.range(0) ? "ABC+BCD+DE+F" : "A+B+C+D+E+F", 6),
                             table.levels);
  const PoissonPosterior posterior(model, table);
  for (auto _ : state) benchmark::DoNotOptimize(fit(posterior).log_marginal);
}
BENCHMARK(BM_LaplaceFit)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_TGammaAccumulate(benchmark::State& state) {
  const auto data = preset_data("sim1-scaled", 2000);
  ChainSettings chain;
  chain.burnin = 50;
  chain.iterations = 500;
  chain.options.record_allocations = false;
  chain.options.record_phi = false;
  const auto trace = run_chain(data, PriorConfig{}, chain);
  for (auto _ : state) benchmark::DoNotOptimize(accumulate(trace).values.data());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(trace.size()));
}
BENCHMARK(BM_TGammaAccumulate)->Unit(benchmark::kMicrosecond);

// Per-step cost once the marginal cache is warm.
void BM_SearchStep(benchmark::State& state) {
  MarginalCache cache(build_table(preset_data("sim1-scaled", 5000)));
  SearchConfig config;
  config.strategy = Strategy::Uniform;
  config.iterations = 2000;
  run_search(cache, nullptr, config);
  GraphSearch search(cache, nullptr, config);
  Rng rng(2);
  SearchStep record;
  for (auto _ : state) search.step(rng, record);
}
BENCHMARK(BM_SearchStep);

}  // namespace

BENCHMARK_MAIN();

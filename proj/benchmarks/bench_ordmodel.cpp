#include <benchmark/benchmark.h>

#include <random>

#include "qrisk/ordmodel.hpp"

using namespace qrisk;

namespace {

DesignMatrix make_design_bench(int n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DesignMatrix d;
  d.n = n;
  for (FeatureName f : binary_feature_names()) d.feature_names.push_back(to_string(f));
  for (FeatureName f : numeric_feature_names()) d.feature_names.push_back(to_string(f));
  d.dataset_levels = {"d0", "d1", "d2"};
  d.scenario_levels = {"s0", "s1", "s2"};
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < kNumBinaryFeatures; ++c)
      d.features.push_back(static_cast<double>(rng() % 2));
    for (int c = 0; c < kNumNumericFeatures; ++c) d.features.push_back(gauss(rng));
    d.dataset_index.push_back(static_cast<int>(rng() % 3));
    d.scenario_index.push_back(static_cast<int>(rng() % 3));
    d.outcome.push_back(static_cast<int>(rng() % 3));
  }
  return d;
}

}  // namespace

static void BM_NllGradient(benchmark::State& state) {
  DesignMatrix d = make_design_bench(static_cast<int>(state.range(0)), 1);
  PackedProblem prob{d, ModelSpec::Full, 1e-4};
  std::vector<double> theta(prob.dim(), 0.1);
  theta[prob.dim() - 1] = 0.0;  // delta
  for (auto _ : state) {
    auto g = prob.gradient(theta);
    benchmark::DoNotOptimize(g);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_NllGradient)->Arg(1000)->Arg(10000)->Arg(50000);

static void BM_Predict(benchmark::State& state) {
  DesignMatrix d = make_design_bench(1, 2);
  OrdinalModel m;
  m.spec = ModelSpec::FeatureOnly;
  m.beta.assign(kNumFeatures, 0.2);
  m.tau0 = -1.0;
  m.tau1 = 1.0;
  PredictRow row{};
  for (int c = 0; c < kNumFeatures; ++c) row.features[c] = (c % 2) ? 1.0 : 0.3;
  for (auto _ : state) {
    auto p = predict(m, row);
    benchmark::DoNotOptimize(p);
  }
}
BENCHMARK(BM_Predict);

static void BM_Fit2000(benchmark::State& state) {
  DesignMatrix d = make_design_bench(2000, 3);
  FitOptions opts;
  opts.max_iters = 400;
  opts.patience = 5;
  for (auto _ : state) {
    OrdinalModel m = fit(d, ModelSpec::Full, opts);
    benchmark::DoNotOptimize(m);
  }
}
BENCHMARK(BM_Fit2000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

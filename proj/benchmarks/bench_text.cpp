#include <benchmark/benchmark.h>

#include "qrisk/diagnostics.hpp"
#include "qrisk/features.hpp"
#include "qrisk/llmio.hpp"
#include "qrisk/proxy.hpp"

#include <random>

using namespace qrisk;

static const char* kSample =
    "Which waypoint is listed for route 4711 in the northern registry, although the "
    "index shifted when the season turned, without retired entries?";

static void BM_ExtractRuleBased(benchmark::State& state) {
  RuleBasedDetector backend;
  Query q;
  q.id = "bench";
  q.text = kSample;
  q.scenario = Scenario::Abstractive;
  q.dataset = "d";
  for (auto _ : state) {
    FeatureVector fv = extract_features(q, backend);
    benchmark::DoNotOptimize(fv);
  }
}
BENCHMARK(BM_ExtractRuleBased);

static void BM_MockEmbed(benchmark::State& state) {
  MockEmbedder emb;
  for (auto _ : state) {
    auto v = emb.embed(kSample);
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(BM_MockEmbed);

static void BM_FuzzDissimilarity(benchmark::State& state) {
  std::vector<std::string> gold = {"waypoint-4711", "the waypoint 4711"};
  for (auto _ : state) {
    double d = fuzz_dissimilarity("waypoint-4711 near the crossing", gold);
    benchmark::DoNotOptimize(d);
  }
}
BENCHMARK(BM_FuzzDissimilarity);

static void BM_RocAuc(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = static_cast<int>(state.range(0));
  std::vector<double> scores(n);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    scores[i] = u(rng);
    labels[i] = rng() % 2;
  }
  for (auto _ : state) {
    double auc = roc_auc(scores, labels);
    benchmark::DoNotOptimize(auc);
  }
}
BENCHMARK(BM_RocAuc)->Arg(1000)->Arg(10000);

static void BM_Reliability(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 10000;
  std::vector<double> preds(n);
  std::vector<int> outs(n);
  for (int i = 0; i < n; ++i) {
    preds[i] = u(rng);
    outs[i] = u(rng) < preds[i] ? 1 : 0;
  }
  for (auto _ : state) {
    auto r = reliability(preds, outs, 10);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_Reliability);

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "qrisk/errors.hpp"
#include "qrisk/pipeline.hpp"
#include "qrisk/synth.hpp"
#include "support/tmpdir.hpp"

using namespace qrisk;
using testsupport::TmpDir;

namespace {

PipelineConfig small_config(const TmpDir& tmp, uint64_t seed = 3) {
  PipelineConfig cfg;
  cfg.corpus_path = tmp.file("corpus.jsonl");
  cfg.workdir = tmp.file("work");
  cfg.seed = seed;
  save_corpus(make_synthetic_corpus(60, 1), cfg.corpus_path);
  return cfg;
}

void run_all(const PipelineConfig& cfg) {
  for (Stage s : {Stage::Extract, Stage::Perturb, Stage::Answer, Stage::Score, Stage::Fit,
                  Stage::Diagnose})
    run_stage(s, cfg);
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("stages are idempotent and resume from hashes") {
  TmpDir tmp("pipe");
  PipelineConfig cfg = small_config(tmp);

  StageResult first = run_stage(Stage::Extract, cfg);
  CHECK_FALSE(first.skipped);
  StageResult again = run_stage(Stage::Extract, cfg);
  CHECK(again.skipped);
  CHECK(again.output_hash == first.output_hash);

  run_all(cfg);

  SUBCASE("a seed change recomputes fit but not extract") {
    PipelineConfig reseeded = cfg;
    reseeded.seed = cfg.seed + 1;
    CHECK(run_stage(Stage::Extract, reseeded).skipped);
    CHECK_FALSE(run_stage(Stage::Fit, reseeded).skipped);
  }
  SUBCASE("strict resume errors on stale artifacts") {
    PipelineConfig reseeded = cfg;
    reseeded.seed = cfg.seed + 2;
    reseeded.strict_resume = true;
    CHECK(run_stage(Stage::Extract, reseeded).skipped);  // still fresh
    CHECK_THROWS_AS(run_stage(Stage::Perturb, reseeded), ValidationError);
  }
}

TEST_CASE("missing upstream artifacts are named") {
  TmpDir tmp("missing");
  PipelineConfig cfg = small_config(tmp);
  try {
    run_stage(Stage::Diagnose, cfg);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    std::string msg = e.what();
    CHECK(msg.find("missing upstream artifact") != std::string::npos);
    CHECK(msg.find("features") != std::string::npos);
  }
  run_stage(Stage::Extract, cfg);
  CHECK_THROWS_AS(run_stage(Stage::Answer, cfg), ValidationError);
}

TEST_CASE("warm cache makes recomputation bit-identical and offline") {
  TmpDir tmp("warm");
  PipelineConfig cfg = small_config(tmp);
  run_all(cfg);

  std::map<Stage, std::string> hashes;
  for (Stage s : {Stage::Extract, Stage::Perturb, Stage::Answer, Stage::Score, Stage::Fit,
                  Stage::Diagnose})
    hashes[s] = run_stage(s, cfg).output_hash;  // all skipped, recorded hashes

  // wipe artifacts and stage metadata, keep the transcript cache
  namespace fs = std::filesystem;
  for (const auto& e : fs::directory_iterator(cfg.workdir)) {
    if (e.path().filename() == "cache") continue;
    fs::remove_all(e.path());
  }

  PipelineConfig replay = cfg;
  replay.cache_mode = CacheMode::ReplayStrict;  // any provider call would throw
  for (Stage s : {Stage::Extract, Stage::Perturb, Stage::Answer, Stage::Score, Stage::Fit,
                  Stage::Diagnose}) {
    StageResult r = run_stage(s, replay);
    CHECK_FALSE(r.skipped);
    CHECK(r.output_hash == hashes[s]);
  }
}

TEST_CASE("precomputed answers are honored") {
  TmpDir tmp("precomp");
  PipelineConfig cfg = small_config(tmp);
  run_stage(Stage::Extract, cfg);
  run_stage(Stage::Perturb, cfg);
  run_stage(Stage::Answer, cfg);
  auto generated = load_answers(cfg.workdir + "/answers.jsonl");
  REQUIRE(!generated.empty());

  // everything answered with the gold: all queries end up Safe
  Corpus corpus = load_corpus(cfg.corpus_path);
  std::map<std::string, std::string> gold;
  for (const auto& q : corpus.queries) gold[q.id] = q.gold->front();
  for (auto& a : generated) a.answer = gold[a.query_id];
  save_answers(generated, tmp.file("gold_answers.jsonl"));

  PipelineConfig pre = cfg;
  pre.answers_path = tmp.file("gold_answers.jsonl");
  run_stage(Stage::Answer, pre);
  run_stage(Stage::Score, pre);
  auto labels = load_labels(pre.workdir + "/labels.jsonl");
  REQUIRE(!labels.empty());
  for (const auto& l : labels) CHECK(l.category == RiskCategory::Safe);
}

TEST_CASE("pipeline config parses overrides") {
  TmpDir tmp("cfg");
  std::ofstream out(tmp.file("cfg.json"), std::ios::binary);
  out << R"({
    "corpus": "c.jsonl",
    "workdir": "w",
    "seed": 9,
    "spec": "FeatureOnly",
    "similarity": {"threshold": 0.8, "max_accepted": 4},
    "weights": {"w_llm": 0.5, "w_fuzz": 0.4, "w_bleu": 0.1},
    "fit": {"lambda_reg": 0.001, "patience": 5},
    "diagnostics": {"length_bins": 10, "uplift_report_threshold": 0.3},
    "providers": {"paraphraser": {"kind": "http", "base_url": "http://x", "model": "m"}}
  })";
  out.close();
  PipelineConfig cfg = load_pipeline_config(tmp.file("cfg.json"));
  CHECK(cfg.corpus_path == "c.jsonl");
  CHECK(cfg.seed == 9);
  CHECK(cfg.spec == ModelSpec::FeatureOnly);
  CHECK(cfg.similarity.threshold == doctest::Approx(0.8));
  CHECK(cfg.similarity.max_accepted == 4);
  CHECK(cfg.weights.w_llm == doctest::Approx(0.5));
  CHECK(cfg.fit_options.lambda_reg == doctest::Approx(0.001));
  CHECK(cfg.fit_options.patience == 5);
  CHECK(cfg.length_bins == 10);
  CHECK(cfg.propensity.report_threshold == doctest::Approx(0.3));
  CHECK(cfg.paraphraser.kind == "http");
  CHECK(cfg.paraphraser.base_url == "http://x");

  ProviderConfig p;
  apply_provider_flag(p, "mock");
  CHECK(p.kind == "mock");
  apply_provider_flag(p, "http://endpoint:8080");
  CHECK(p.kind == "http");
  CHECK(p.base_url == "http://endpoint:8080");

  CHECK_THROWS_AS(load_pipeline_config(tmp.file("nope.json")), ValidationError);
}

TEST_CASE("triage routes by risk and fired features") {
  OrdinalModel model;
  model.spec = ModelSpec::FeatureOnly;
  model.beta.assign(kNumFeatures, 0.0);
  for (FeatureName f : binary_feature_names())
    model.feature_names.push_back(to_string(f));
  for (FeatureName f : numeric_feature_names())
    model.feature_names.push_back(to_string(f));
  model.tau0 = -1.0;
  model.tau1 = 1.0;
  model.numeric_stats.mean = {8.0, 1.2, 3.0, 4.0};
  model.numeric_stats.stddev = {4.0, 0.5, 1.0, 1.0};
  RuleBasedDetector backend;

  SUBCASE("beta = 0 gives a constant risk; routing depends only on the threshold") {
    double p1 = triage("Anything at all?", Scenario::Abstractive, model, backend, 0.5)
                    .p_risky;
    double p2 = triage("Tell me about stuff.", Scenario::Abstractive, model, backend, 0.5)
                    .p_risky;
    CHECK(p1 == doctest::Approx(p2).epsilon(1e-12));
    CHECK(triage("Anything?", Scenario::Abstractive, model, backend, 0.5).route ==
          TriageRoute::Direct);
  }
  SUBCASE("threshold 0 never routes direct") {
    auto res = triage("Which waypoint is listed for route 7?", Scenario::Abstractive,
                      model, backend, 0.0);
    CHECK(res.route != TriageRoute::Direct);
  }
  SUBCASE("risky features raise p_risky under signed coefficients") {
    OrdinalModel signed_model = model;
    signed_model.beta[feature_index(FeatureName::LackOfSpecificity)] = 0.868;
    signed_model.beta[feature_index(FeatureName::ClauseComplexity)] = 0.568;
    signed_model.beta[feature_index(FeatureName::Answerability)] = -1.106;
    signed_model.beta[feature_index(FeatureName::IntentionGrounding)] = -0.168;
    double risky =
        triage("Tell me about route 9 and stuff, although the index shifted.",
               Scenario::Abstractive, signed_model, backend, 0.5)
            .p_risky;
    double safe = triage("Which waypoint is listed for route 9 in the registry?",
                         Scenario::Abstractive, signed_model, backend, 0.5)
                      .p_risky;
    CHECK(risky > safe);
  }
  SUBCASE("clarify when underspecified or ungrounded, otherwise ground") {
    auto vague = triage("Tell me about route 9 and stuff.", Scenario::Abstractive, model,
                        backend, 0.0);
    CHECK(vague.route == TriageRoute::Clarify);
    auto precise = triage("Which waypoint is listed for route 9 in the registry?",
                          Scenario::Abstractive, model, backend, 0.0);
    CHECK(precise.route == TriageRoute::Ground);
  }
}

}  // TEST_SUITE

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "qrisk/corpus.hpp"
#include "qrisk/diagnostics.hpp"
#include "qrisk/features.hpp"
#include "qrisk/llmio.hpp"
#include "qrisk/ordmodel.hpp"
#include "qrisk/perturb.hpp"
#include "qrisk/proxy.hpp"

namespace qrisk {

enum class Stage { Extract, Perturb, Answer, Score, Fit, Diagnose };

const char* to_string(Stage s);
Stage stage_from_string(const std::string& s);

struct PipelineConfig {
  std::string corpus_path;
  std::string workdir = "qrisk-work";
  uint64_t seed = 0;

  std::string detector = "rule";  // "rule" | "llm"
  SimilarityConfig similarity;
  int budget_multiplier = 3;  // candidate budget = multiplier * max_accepted
  ProxyWeights weights;
  std::string answers_path;  // precomputed answers JSONL for offline runs

  ModelSpec spec = ModelSpec::Full;
  FitOptions fit_options;

  int length_bins = 30;
  int length_min_bin = 50;
  int reliability_bins = 10;
  PropensityOptions propensity;
  bool uplift_on_model_probability = false;
  double triage_threshold = 0.5;

  ProviderConfig paraphraser, answerer, judge, detector_provider, bi_encoder, cross_encoder;
  std::string cache_dir;  // defaults to <workdir>/cache
  CacheMode cache_mode = CacheMode::Record;
  bool strict_resume = false;  // stale artifacts error instead of recomputing
};

PipelineConfig load_pipeline_config(const std::string& path);

// "mock" keeps the deterministic offline provider; any other value is taken
// as an HTTP base URL.
void apply_provider_flag(ProviderConfig& cfg, const std::string& value);

struct Providers {
  std::shared_ptr<CompletionProvider> paraphraser, answerer, judge, detector;
  std::shared_ptr<EmbeddingProvider> bi;
  std::shared_ptr<CrossScorer> cross;
  std::shared_ptr<Transcript> transcript;
};

Providers make_providers(const PipelineConfig& cfg);

struct StageResult {
  std::string artifact;  // file (or directory for diagnose)
  bool skipped = false;  // inputs unchanged, recomputation avoided
  std::string output_hash;
};

// Runs one stage against the workdir. Upstream artifacts must exist; a stage
// whose config hash and input hashes match its recorded meta is skipped.
StageResult run_stage(Stage stage, const PipelineConfig& cfg);

// --- answers artifact -------------------------------------------------------------

struct AnswerRecord {
  std::string query_id;
  int paraphrase_index = 0;
  std::string answer;
};

void save_answers(const std::vector<AnswerRecord>& answers, const std::string& path);
std::vector<AnswerRecord> load_answers(const std::string& path);

// --- triage ------------------------------------------------------------------------

enum class TriageRoute { Direct, Clarify, Ground };
const char* to_string(TriageRoute r);

struct TriageRules {
  // high-risk queries route to clarify when any of these fired...
  std::vector<FeatureName> clarify_when_present = {FeatureName::LackOfSpecificity};
  // ...or any of these is absent; otherwise to a grounded path
  std::vector<FeatureName> clarify_when_absent = {FeatureName::IntentionGrounding};
};

struct TriageResult {
  double p_risky = 0.0;
  TriageRoute route = TriageRoute::Direct;
  FeatureVector features;
};

// Detect features, standardize numerics with the model's frozen statistics,
// predict P(Risky), and route. Unknown datasets map to the reference level.
TriageResult triage(const std::string& query_text, Scenario scenario,
                    const OrdinalModel& model, DetectorBackend& backend, double threshold,
                    const TriageRules& rules = {});

}  // namespace qrisk

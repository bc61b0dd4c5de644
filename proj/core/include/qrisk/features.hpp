#pragma once

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qrisk/corpus.hpp"
#include "qrisk/features_names.hpp"
#include "qrisk/llmio.hpp"
#include "qrisk/text.hpp"

namespace qrisk {

// Complete per-query feature vector: 17 binary indicators, 4 raw counts,
// standardized numeric values, and one short rationale per feature.
struct FeatureVector {
  std::string query_id;
  std::array<int, kNumBinaryFeatures> binary{};
  std::array<int, kNumNumericFeatures> numeric_raw{};
  std::array<double, kNumNumericFeatures> numeric_scaled{};
  std::array<std::string, kNumFeatures> rationales{};

  int binary_at(FeatureName f) const;
  int raw_at(FeatureName f) const;
  double scaled_at(FeatureName f) const;
  const std::string& rationale_at(FeatureName f) const;
};

struct Detection {
  bool label = false;
  std::string rationale;
};

// A binary-feature detector. Implementations are pure given their inputs.
class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;
  virtual Detection detect(FeatureName feature, const Query& query) = 0;
  virtual const char* name() const = 0;
};

// Deterministic keyword/pattern heuristics; runs fully offline.
class RuleBasedDetector : public DetectorBackend {
 public:
  Detection detect(FeatureName feature, const Query& query) override;
  const char* name() const override { return "rule-based"; }
};

// Prompts a completion provider with the per-feature template and parses the
// structured `label=<true|false>; rationale="..."` reply. One repair retry
// re-prompts with the malformed text before giving up.
class LlmJudgeDetector : public DetectorBackend {
 public:
  LlmJudgeDetector(std::shared_ptr<CompletionProvider> provider, ProviderConfig cfg);
  Detection detect(FeatureName feature, const Query& query) override;
  const char* name() const override { return "llm-judge"; }

 private:
  std::shared_ptr<CompletionProvider> provider_;
  ProviderConfig cfg_;
};

// Parses `label=true; rationale="..."`; strict on label, lenient on rationale.
std::optional<Detection> parse_detection(const std::string& raw);

// --- numeric structure features ----------------------------------------------

int count_tokens(std::string_view text, const Tokenizer& tokenizer);
int count_tokens(std::string_view text);  // default whitespace tokenizer

// 1 + number of subordinate/relative/conditional clause markers heading a
// clause; 0 for empty text.
int count_clauses(std::string_view text);

struct SyntaxAnnotations {
  int dep_depth = 0;
  int parse_height = 0;
};

using SyntaxProvider = std::function<SyntaxAnnotations(std::string_view)>;

// Heuristic approximation from clause nesting and phrase brackets; a real
// parser can be swapped in, or precomputed corpus columns used instead.
SyntaxProvider baseline_syntax_provider();

struct ExtractionOptions {
  Tokenizer tokenizer = default_tokenizer();
  SyntaxProvider syntax = baseline_syntax_provider();
};

// Fills all 21 features. Numeric values come from corpus columns when the
// query carries them, otherwise from the configured counters/provider.
FeatureVector extract_features(const Query& query, DetectorBackend& backend,
                               const ExtractionOptions& opts = {});

// --- corpus-level standardization ----------------------------------------------

struct NumericStats {
  std::array<double, kNumNumericFeatures> mean{};
  std::array<double, kNumNumericFeatures> stddev{};  // population stddev
};

NumericStats compute_numeric_stats(const std::vector<FeatureVector>& corpus_features);

// (raw - mean) / stddev; stddev 0 maps to scaled 0. Binary untouched.
void apply_numeric_stats(std::vector<FeatureVector>& features, const NumericStats& stats);
std::vector<FeatureVector> scale_numeric(std::vector<FeatureVector> corpus_features);

// --- persistence -----------------------------------------------------------------

void save_features(const std::vector<FeatureVector>& features, const std::string& path);
std::vector<FeatureVector> load_features(const std::string& path);

// Accuracy per feature of a backend against a labeled fixture set.
struct LabeledCase {
  Query query;
  FeatureName feature;
  bool expected = false;
};
std::map<FeatureName, double> detector_accuracy(const std::vector<LabeledCase>& cases,
                                                DetectorBackend& backend);

}  // namespace qrisk

#pragma once

#include <array>
#include <string>

namespace qrisk {

// 17 binary indicators followed by 4 numeric structure features.
enum class FeatureName {
  LackOfSpecificity,
  ClauseComplexity,
  NegationUsage,
  ExcessiveDetails,
  AnaphoraUsage,
  PolysemousWords,
  RareWordUsage,
  PragmaticFeatures,
  Presupposition,
  ContextualConstraints,
  NamedEntitiesPresent,
  DomainSpecificity,
  QueryScenarioMismatch,
  SuperlativeUsage,
  IntentionGrounding,
  Subjectivity,
  Answerability,
  QueryTokenLength,
  NumberOfClauses,
  DependencyDepth,
  ParseTreeHeight,
};

inline constexpr int kNumBinaryFeatures = 17;
inline constexpr int kNumNumericFeatures = 4;
inline constexpr int kNumFeatures = kNumBinaryFeatures + kNumNumericFeatures;

const std::array<FeatureName, kNumBinaryFeatures>& binary_feature_names();
const std::array<FeatureName, kNumNumericFeatures>& numeric_feature_names();

bool is_binary_feature(FeatureName f);

// Stable identifier, e.g. "LackOfSpecificity" (used in JSON/CSV artifacts).
const char* to_string(FeatureName f);

// Human-readable name, e.g. "Lack of Specificity" (used in prompts/reports).
const char* display_name(FeatureName f);

FeatureName feature_from_string(const std::string& name);

// Position of f within [binary..., numeric...]; 0-based, stable.
int feature_index(FeatureName f);

}  // namespace qrisk

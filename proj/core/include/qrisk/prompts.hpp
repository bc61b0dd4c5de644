#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qrisk/corpus.hpp"
#include "qrisk/features_names.hpp"

namespace qrisk {

// Rendered detector prompt for one binary feature. The Query-Scenario
// Mismatch template additionally receives the declared scenario.
std::string detector_prompt(FeatureName feature, const std::string& query_text,
                            Scenario scenario);

// Paraphrase-generation instruction for one sampled candidate.
std::string paraphrase_prompt(const std::string& query_text);

// Grading prompt comparing a model answer against the gold reference set.
std::string judge_prompt(const std::string& query_text, const std::string& answer,
                         const std::vector<std::string>& gold);

// The fixed answering recipe used for every paraphrase.
std::string answer_prompt(const std::string& question,
                          const std::optional<std::string>& context,
                          const std::optional<std::vector<std::string>>& choices);

}  // namespace qrisk

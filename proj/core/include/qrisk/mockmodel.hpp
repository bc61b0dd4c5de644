#pragma once

#include <string>

#include "qrisk/llmio.hpp"

namespace qrisk {

// Offline stand-in for a completion endpoint. Recognizes the artifact's own
// prompt shapes and answers each deterministically:
//   - paraphrase prompts: light lexical perturbations of the query (an
//     occasional off-topic candidate exercises the similarity gate);
//   - answering prompts: extracts the route token and answers correctly or
//     not, with a wrongness probability driven by the question's rule-based
//     risk features (underspecified/complex questions fail more often);
//   - judge prompts: normalized string match of the answer against the gold
//     set;
//   - detector prompts: the rule-based detector verdict for the input.
// Everything is a pure function of (prompt, sample_seed).
class ScriptedCompletion : public CompletionProvider {
 public:
  std::string complete(const std::string& prompt, uint64_t sample_seed) override;
};

// Wrongness probability the scripted answerer assigns to a question; exposed
// for tests that pin the difficulty profile of the synthetic corpus.
double scripted_wrongness(const std::string& question);

}  // namespace qrisk

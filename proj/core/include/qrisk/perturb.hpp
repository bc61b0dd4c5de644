#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "qrisk/corpus.hpp"
#include "qrisk/llmio.hpp"

namespace qrisk {

struct Paraphrase {
  std::string source_id;
  std::string text;
  double similarity = 0.0;
  bool accepted = false;
};

struct SimilarityConfig {
  double lambda_bi = 0.6;
  double lambda_cross = 0.4;
  double threshold = 0.85;
  int max_accepted = 6;

  void validate() const;  // lambda_bi + lambda_cross = 1, both >= 0
};

// Accepted paraphrases in acceptance order ("first k that pass the gate").
struct Neighborhood {
  std::string source_id;
  std::vector<Paraphrase> paraphrases;
  int generation_attempts = 0;
  bool partial = false;  // fewer than max_accepted passed within budget
};

// lambda_bi * cos(e(a), e(b)) + lambda_cross * (P(a,b) + P(b,a)) / 2, clamped
// to [0,1]. The cross term is symmetrized here; cosine is symmetric already.
double hybrid_similarity(const std::string& a, const std::string& b,
                         EmbeddingProvider& bi, CrossScorer& cross,
                         const SimilarityConfig& cfg);

// Produces the k-th candidate paraphrase text for a query.
using ParaphraseGenerator = std::function<std::string(const Query&, int draw_index)>;

// Wraps a completion provider into a generator: renders the paraphrase
// instruction with a per-draw sampling seed and parses `paraphrase="..."`.
ParaphraseGenerator make_paraphrase_sampler(std::shared_ptr<CompletionProvider> provider,
                                            uint64_t base_seed);

// Draws candidates until max_accepted pass the similarity gate or the budget
// is exhausted. Never inspects gold answers. An empty result (zero accepted)
// leaves the query unlabeled downstream.
Neighborhood build_neighborhood(const Query& query, const ParaphraseGenerator& generator,
                                EmbeddingProvider& bi, CrossScorer& cross,
                                const SimilarityConfig& cfg, int budget);

void save_neighborhoods(const std::vector<Neighborhood>& hoods, const std::string& path);
std::vector<Neighborhood> load_neighborhoods(const std::string& path);

}  // namespace qrisk

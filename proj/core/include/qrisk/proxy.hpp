#pragma once

#include <string>
#include <vector>

#include "qrisk/corpus.hpp"
#include "qrisk/llmio.hpp"
#include "qrisk/perturb.hpp"

namespace qrisk {

// A paraphrase counts as hallucinated when the convex proxy exceeds this.
inline constexpr double kHallucinationThreshold = 0.5;

struct ProxyWeights {
  double w_llm = 0.6;
  double w_fuzz = 0.3;
  double w_bleu = 0.1;

  void validate() const;  // all >= 0 and summing to 1
};

// All three components measure wrongness: s_llm = 1 means the judge deemed
// the answer incorrect; s_fuzz and s_bleu are dissimilarities (1 - similarity).
struct ProxyScore {
  int s_llm = 0;
  double s_fuzz = 0.0;
  double s_bleu = 0.0;
  double h_hat = 0.0;
  bool hallucinated = false;
};

struct Verdict {
  bool correct = false;
  std::string rationale;
};

// Grades an answer against the gold set via the judge template; any gold-set
// member counts as correct. Retries once on unparseable output.
Verdict judge_answer(const Query& query, const std::string& answer,
                     CompletionProvider& judge);

// 1 - max over gold of normalized indel similarity (case-folded,
// whitespace-normalized). 0 for an exact match, 1 for disjoint strings.
double fuzz_dissimilarity(const std::string& answer, const std::vector<std::string>& gold);

// 1 - BLEU-1 against the best gold reference (clipped unigram precision times
// brevity penalty, no smoothing; empty candidate scores precision 0).
double bleu1_dissimilarity(const std::string& answer, const std::vector<std::string>& gold);

ProxyScore score_paraphrase(const Query& query, const std::string& answer,
                            const ProxyWeights& weights, CompletionProvider& judge);

// Aggregates one answer per accepted paraphrase into the ordinal label;
// m = neighborhood size (partial neighborhoods label with their own m).
RiskLabel label_query(const Query& query, const Neighborhood& neighborhood,
                      const std::vector<std::string>& answers, const ProxyWeights& weights,
                      CompletionProvider& judge);

// --- reward-weight simplex sweep ------------------------------------------------

struct SweepSample {
  double s_llm = 0.0;
  double s_fuzz = 0.0;
  double s_bleu = 0.0;
  bool positive = false;  // human hallucination label
};

struct SweepPoint {
  ProxyWeights weights;
  double auc = 0.0;
};

// Rank-based ROC-AUC of scores against binary labels (ties get half credit).
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Evaluates h_hat at every grid point of the weight simplex; grid_step must
// divide 1. Output sorted by AUC descending, ties by lexicographic weights.
std::vector<SweepPoint> simplex_sweep(const std::vector<SweepSample>& labeled,
                                      double grid_step);

// --- persistence -----------------------------------------------------------------

struct ScoredParaphrase {
  std::string query_id;
  int paraphrase_index = 0;
  ProxyScore score;
};

void save_scores(const std::vector<ScoredParaphrase>& scores, const std::string& path);
std::vector<ScoredParaphrase> load_scores(const std::string& path);

void save_sweep_csv(const std::vector<SweepPoint>& points, const std::string& path);

}  // namespace qrisk

#include "qrisk/proxy.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "qrisk/errors.hpp"
#include "qrisk/prompts.hpp"
#include "qrisk/text.hpp"

namespace qrisk {

using nlohmann::json;

void ProxyWeights::validate() const {
  if (w_llm < 0.0 || w_fuzz < 0.0 || w_bleu < 0.0)
    throw ValidationError("proxy weights must be non-negative");
  if (std::abs(w_llm + w_fuzz + w_bleu - 1.0) > 1e-9)
    throw ValidationError("proxy weights must sum to 1");
}

namespace {

std::optional<Verdict> parse_verdict(const std::string& raw) {
  std::string folded = casefold(raw);
  size_t pos = folded.find("correct=");
  if (pos == std::string::npos) return std::nullopt;
  size_t val = pos + 8;
  while (val < folded.size() && (folded[val] == ' ' || folded[val] == '"')) ++val;
  Verdict v;
  if (folded.compare(val, 4, "true") == 0) {
    v.correct = true;
  } else if (folded.compare(val, 5, "false") == 0) {
    v.correct = false;
  } else {
    return std::nullopt;
  }
  size_t rpos = raw.find("rationale=");
  if (rpos != std::string::npos) {
    std::string rest = raw.substr(rpos + 10);
    size_t q0 = rest.find('"');
    if (q0 != std::string::npos) {
      size_t q1 = rest.find('"', q0 + 1);
      v.rationale = (q1 == std::string::npos) ? rest.substr(q0 + 1)
                                              : rest.substr(q0 + 1, q1 - q0 - 1);
    }
  }
  return v;
}

// Indel distance via LCS; similarity = 2*LCS / (|a| + |b|).
double indel_similarity(const std::string& a, const std::string& b) {
  if (a.empty() && b.empty()) return 1.0;
  const size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1, 0), cur(m + 1, 0);
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      cur[j] = (a[i - 1] == b[j - 1]) ? prev[j - 1] + 1
                                      : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return 2.0 * prev[m] / static_cast<double>(n + m);
}

double bleu1(const std::string& answer, const std::string& reference) {
  auto cand = whitespace_tokens(casefold(answer));
  auto ref = whitespace_tokens(casefold(reference));
  if (cand.empty()) return 0.0;
  std::map<std::string, int> ref_counts;
  for (const auto& t : ref) ++ref_counts[t];
  std::map<std::string, int> cand_counts;
  for (const auto& t : cand) ++cand_counts[t];
  long clipped = 0;
  for (const auto& [tok, c] : cand_counts) {
    auto it = ref_counts.find(tok);
    if (it != ref_counts.end()) clipped += std::min(c, it->second);
  }
  double precision = static_cast<double>(clipped) / cand.size();
  double bp = cand.size() >= ref.size()
                  ? 1.0
                  : std::exp(1.0 - static_cast<double>(ref.size()) / cand.size());
  return precision * bp;
}

}  // namespace

Verdict judge_answer(const Query& query, const std::string& answer,
                     CompletionProvider& judge) {
  if (!query.gold || query.gold->empty())
    throw ValidationError("query \"" + query.id + "\" has no gold answers to judge against");
  const std::string prompt = judge_prompt(query.text, answer, *query.gold);
  std::string raw = judge.complete(prompt, 0);
  if (auto v = parse_verdict(raw)) return *v;
  std::string repair = prompt + "\n\nYour previous reply could not be parsed:\n" + raw +
                       "\nReply again using exactly: correct=<true|false>; rationale=\"...\"";
  raw = judge.complete(repair, 1);
  if (auto v = parse_verdict(raw)) return *v;
  throw ProviderError("unparseable judge verdict: " + raw);
}

double fuzz_dissimilarity(const std::string& answer, const std::vector<std::string>& gold) {
  if (gold.empty()) throw ValidationError("fuzz_dissimilarity requires non-empty gold");
  const std::string a = normalize_ws(answer);
  double best = 0.0;
  for (const auto& g : gold) best = std::max(best, indel_similarity(a, normalize_ws(g)));
  return 1.0 - best;
}

double bleu1_dissimilarity(const std::string& answer, const std::vector<std::string>& gold) {
  if (gold.empty()) throw ValidationError("bleu1_dissimilarity requires non-empty gold");
  double best = 0.0;
  for (const auto& g : gold) best = std::max(best, bleu1(answer, g));
  return 1.0 - best;
}

ProxyScore score_paraphrase(const Query& query, const std::string& answer,
                            const ProxyWeights& weights, CompletionProvider& judge) {
  weights.validate();
  if (!query.gold || query.gold->empty())
    throw ValidationError("query \"" + query.id + "\" has no gold answers");
  ProxyScore s;
  s.s_llm = judge_answer(query, answer, judge).correct ? 0 : 1;
  s.s_fuzz = fuzz_dissimilarity(answer, *query.gold);
  s.s_bleu = bleu1_dissimilarity(answer, *query.gold);
  s.h_hat = weights.w_llm * s.s_llm + weights.w_fuzz * s.s_fuzz + weights.w_bleu * s.s_bleu;
  s.hallucinated = s.h_hat > kHallucinationThreshold;
  return s;
}

RiskLabel label_query(const Query& query, const Neighborhood& neighborhood,
                      const std::vector<std::string>& answers, const ProxyWeights& weights,
                      CompletionProvider& judge) {
  if (neighborhood.paraphrases.empty())
    throw ValidationError("cannot label query \"" + query.id + "\": empty neighborhood");
  if (answers.size() != neighborhood.paraphrases.size())
    throw ValidationError("expected one answer per accepted paraphrase");
  int tally = 0;
  for (const auto& a : answers)
    if (score_paraphrase(query, a, weights, judge).hallucinated) ++tally;
  return make_risk_label(query.id, tally, static_cast<int>(neighborhood.paraphrases.size()));
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw ValidationError("roc_auc: size mismatch or empty input");
  size_t n_pos = 0;
  for (int y : labels) n_pos += (y != 0);
  size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw ValidationError("roc_auc undefined for a single-class label set");

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // average ranks over tie groups; sum positive ranks
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (size_t k = i; k <= j; ++k)
      if (labels[order[k]] != 0) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  double auc = (rank_sum_pos - 0.5 * n_pos * (n_pos + 1)) /
               (static_cast<double>(n_pos) * static_cast<double>(n_neg));
  return auc;
}

std::vector<SweepPoint> simplex_sweep(const std::vector<SweepSample>& labeled,
                                      double grid_step) {
  if (labeled.empty()) throw ValidationError("simplex_sweep requires a non-empty labeled set");
  if (grid_step <= 0.0 || grid_step > 1.0)
    throw ValidationError("grid_step must lie in (0, 1]");
  double k_real = 1.0 / grid_step;
  int K = static_cast<int>(std::lround(k_real));
  if (std::abs(k_real - K) > 1e-9)
    throw ValidationError("grid_step must divide 1 exactly");

  std::vector<int> labels;
  labels.reserve(labeled.size());
  for (const auto& s : labeled) labels.push_back(s.positive ? 1 : 0);
  bool has_pos = std::count(labels.begin(), labels.end(), 1) > 0;
  bool has_neg = std::count(labels.begin(), labels.end(), 0) > 0;
  if (!has_pos || !has_neg)
    throw ValidationError("simplex_sweep requires both classes in the labeled set");

  std::vector<SweepPoint> out;
  std::vector<double> scores(labeled.size());
  for (int i = 0; i <= K; ++i) {
    for (int j = 0; j <= K - i; ++j) {
      int k = K - i - j;
      ProxyWeights w;
      w.w_llm = static_cast<double>(i) / K;
      w.w_fuzz = static_cast<double>(j) / K;
      w.w_bleu = static_cast<double>(k) / K;
      for (size_t t = 0; t < labeled.size(); ++t)
        scores[t] = w.w_llm * labeled[t].s_llm + w.w_fuzz * labeled[t].s_fuzz +
                    w.w_bleu * labeled[t].s_bleu;
      out.push_back({w, roc_auc(scores, labels)});
    }
  }
  std::sort(out.begin(), out.end(), [](const SweepPoint& a, const SweepPoint& b) {
    if (a.auc != b.auc) return a.auc > b.auc;
    if (a.weights.w_llm != b.weights.w_llm) return a.weights.w_llm < b.weights.w_llm;
    if (a.weights.w_fuzz != b.weights.w_fuzz) return a.weights.w_fuzz < b.weights.w_fuzz;
    return a.weights.w_bleu < b.weights.w_bleu;
  });
  return out;
}

void save_scores(const std::vector<ScoredParaphrase>& scores, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write scores file: " + path);
  for (const auto& s : scores) {
    json j;
    j["query_id"] = s.query_id;
    j["paraphrase_index"] = s.paraphrase_index;
    j["s_llm"] = s.score.s_llm;
    j["s_fuzz"] = s.score.s_fuzz;
    j["s_bleu"] = s.score.s_bleu;
    j["h_hat"] = s.score.h_hat;
    j["hallucinated"] = s.score.hallucinated;
    out << j.dump() << "\n";
  }
}

std::vector<ScoredParaphrase> load_scores(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open scores file: " + path);
  std::vector<ScoredParaphrase> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    ScoredParaphrase s;
    s.query_id = j.at("query_id").get<std::string>();
    s.paraphrase_index = j.at("paraphrase_index").get<int>();
    s.score.s_llm = j.at("s_llm").get<int>();
    s.score.s_fuzz = j.at("s_fuzz").get<double>();
    s.score.s_bleu = j.at("s_bleu").get<double>();
    s.score.h_hat = j.at("h_hat").get<double>();
    s.score.hallucinated = j.at("hallucinated").get<bool>();
    out.push_back(std::move(s));
  }
  return out;
}

void save_sweep_csv(const std::vector<SweepPoint>& points, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write sweep csv: " + path);
  out << "w_llm,w_fuzz,w_bleu,auc\n";
  char buf[128];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof(buf), "%.6g,%.6g,%.6g,%.17g\n", p.weights.w_llm,
                  p.weights.w_fuzz, p.weights.w_bleu, p.auc);
    out << buf;
  }
}

}  // namespace qrisk

#include "qrisk/perturb.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "qrisk/errors.hpp"
#include "qrisk/hashing.hpp"
#include "qrisk/prompts.hpp"

namespace qrisk {

using nlohmann::json;

void SimilarityConfig::validate() const {
  if (lambda_bi < 0.0 || lambda_cross < 0.0)
    throw ValidationError("similarity weights must be non-negative");
  if (std::abs(lambda_bi + lambda_cross - 1.0) > 1e-9)
    throw ValidationError("similarity weights must sum to 1");
  if (threshold < 0.0 || threshold > 1.0)
    throw ValidationError("similarity threshold must lie in [0,1]");
  if (max_accepted < 1) throw ValidationError("max_accepted must be >= 1");
}

double hybrid_similarity(const std::string& a, const std::string& b,
                         EmbeddingProvider& bi, CrossScorer& cross,
                         const SimilarityConfig& cfg) {
  cfg.validate();
  double cos = cosine_similarity(bi.embed(a), bi.embed(b));
  double p_ab = cross.score(a, b);
  double p_ba = cross.score(b, a);
  double s = cfg.lambda_bi * cos + cfg.lambda_cross * 0.5 * (p_ab + p_ba);
  return std::min(1.0, std::max(0.0, s));
}

ParaphraseGenerator make_paraphrase_sampler(std::shared_ptr<CompletionProvider> provider,
                                            uint64_t base_seed) {
  return [provider, base_seed](const Query& q, int draw_index) -> std::string {
    uint64_t seed = mix_seed(mix_seed(base_seed, q.id), static_cast<uint64_t>(draw_index));
    std::string raw = provider->complete(paraphrase_prompt(q.text), seed);
    // structured form: paraphrase="..."; fall back to the raw reply
    size_t pos = raw.find("paraphrase=");
    if (pos != std::string::npos) {
      std::string rest = raw.substr(pos + 11);
      size_t q0 = rest.find('"');
      if (q0 != std::string::npos) {
        size_t q1 = rest.find('"', q0 + 1);
        if (q1 != std::string::npos) return rest.substr(q0 + 1, q1 - q0 - 1);
      }
    }
    // strip surrounding whitespace/newlines
    size_t b = raw.find_first_not_of(" \t\r\n");
    size_t e = raw.find_last_not_of(" \t\r\n");
    if (b == std::string::npos) return raw;
    return raw.substr(b, e - b + 1);
  };
}

Neighborhood build_neighborhood(const Query& query, const ParaphraseGenerator& generator,
                                EmbeddingProvider& bi, CrossScorer& cross,
                                const SimilarityConfig& cfg, int budget) {
  cfg.validate();
  if (budget < cfg.max_accepted)
    throw ValidationError("generation budget must be >= max_accepted");

  Neighborhood hood;
  hood.source_id = query.id;
  for (int draw = 0; draw < budget; ++draw) {
    if (static_cast<int>(hood.paraphrases.size()) >= cfg.max_accepted) break;
    std::string candidate = generator(query, draw);
    ++hood.generation_attempts;
    double s = hybrid_similarity(query.text, candidate, bi, cross, cfg);
    if (s >= cfg.threshold) {
      Paraphrase p;
      p.source_id = query.id;
      p.text = std::move(candidate);
      p.similarity = s;
      p.accepted = true;
      hood.paraphrases.push_back(std::move(p));
    }
  }
  hood.partial = static_cast<int>(hood.paraphrases.size()) < cfg.max_accepted;
  return hood;
}

void save_neighborhoods(const std::vector<Neighborhood>& hoods, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write neighborhoods file: " + path);
  for (const auto& h : hoods) {
    json j;
    j["source_id"] = h.source_id;
    json list = json::array();
    for (const auto& p : h.paraphrases)
      list.push_back({{"text", p.text}, {"similarity", p.similarity}});
    j["paraphrases"] = std::move(list);
    j["partial"] = h.partial;
    j["generation_attempts"] = h.generation_attempts;
    out << j.dump() << "\n";
  }
}

std::vector<Neighborhood> load_neighborhoods(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open neighborhoods file: " + path);
  std::vector<Neighborhood> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": malformed JSON (" +
                            e.what() + ")");
    }
    Neighborhood h;
    h.source_id = j.at("source_id").get<std::string>();
    for (const auto& pj : j.at("paraphrases")) {
      Paraphrase p;
      p.source_id = h.source_id;
      p.text = pj.at("text").get<std::string>();
      p.similarity = pj.at("similarity").get<double>();
      p.accepted = true;
      h.paraphrases.push_back(std::move(p));
    }
    h.partial = j.value("partial", false);
    h.generation_attempts = j.value("generation_attempts", 0);
    out.push_back(std::move(h));
  }
  return out;
}

}  // namespace qrisk

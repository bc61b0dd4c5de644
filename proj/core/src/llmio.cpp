#include "qrisk/llmio.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <thread>
#include <unordered_set>

#include "qrisk/errors.hpp"
#include "qrisk/hashing.hpp"
#include "qrisk/text.hpp"

namespace qrisk {

namespace fs = std::filesystem;
using nlohmann::json;

// --- payloads and cache keys -------------------------------------------------

std::string completion_payload(const ProviderConfig& cfg, const std::string& prompt,
                               uint64_t sample_seed) {
  json j;
  j["messages"] = json::array({json{{"role", "user"}, {"content", prompt}}});
  j["model"] = cfg.model_name;
  j["seed"] = sample_seed;
  j["temperature"] = cfg.temperature;
  return j.dump();  // nlohmann keeps keys sorted; number formatting is stable
}

std::string embedding_payload(const ProviderConfig& cfg, const std::string& text) {
  json j;
  j["input"] = text;
  j["model"] = cfg.model_name;
  return j.dump();
}

std::string cross_payload(const ProviderConfig& cfg, const std::string& a,
                          const std::string& b) {
  json j;
  j["model"] = cfg.model_name;
  j["query"] = a;
  j["text"] = b;
  return j.dump();
}

std::string Transcript::key_for(const std::string& provider_kind, const std::string& model,
                                const std::string& canonical_payload) {
  return sha256_hex(provider_kind + "\x1f" + model + "\x1f" + canonical_payload);
}

std::string completion_cache_key(const ProviderConfig& cfg, const std::string& prompt,
                                 uint64_t sample_seed) {
  return Transcript::key_for("completion", cfg.model_name,
                             completion_payload(cfg, prompt, sample_seed));
}

std::string embedding_cache_key(const ProviderConfig& cfg, const std::string& text) {
  return Transcript::key_for("embedding", cfg.model_name, embedding_payload(cfg, text));
}

std::string cross_cache_key(const ProviderConfig& cfg, const std::string& a,
                            const std::string& b) {
  return Transcript::key_for("cross", cfg.model_name, cross_payload(cfg, a, b));
}

// --- Transcript --------------------------------------------------------------

namespace {
std::mutex g_store_mutex;
}

Transcript::Transcript(std::string cache_dir) : dir_(std::move(cache_dir)) {
  fs::create_directories(dir_);
}

std::string Transcript::path_for(const std::string& key) const {
  return dir_ + "/" + key.substr(0, 2) + "/" + key + ".json";
}

std::optional<std::string> Transcript::lookup(const std::string& key) const {
  std::ifstream in(path_for(key), std::ios::binary);
  if (!in) return std::nullopt;
  std::string line;
  std::getline(in, line);
  try {
    json j = json::parse(line);
    return j.at("response").get<std::string>();
  } catch (const json::exception& e) {
    throw ProviderError("corrupt transcript entry " + key + ": " + e.what());
  }
}

bool Transcript::contains(const std::string& key) const {
  return fs::exists(path_for(key));
}

void Transcript::store(const std::string& key, const std::string& request_payload,
                       const std::string& response, int attempts, double temperature) {
  std::lock_guard<std::mutex> lock(g_store_mutex);
  if (fs::exists(path_for(key))) return;  // append only on miss
  json j;
  j["key"] = key;
  j["request"] = request_payload;
  j["response"] = response;
  j["attempts"] = attempts;
  j["temperature"] = temperature;
  j["timestamp"] = static_cast<int64_t>(
      std::chrono::duration_cast<std::chrono::seconds>(
          std::chrono::system_clock::now().time_since_epoch())
          .count());
  fs::path target = path_for(key);
  fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << j.dump() << "\n";
  }
  fs::rename(tmp, target);
}

// --- cached wrappers ----------------------------------------------------------

CachedCompletion::CachedCompletion(std::shared_ptr<CompletionProvider> inner,
                                   std::shared_ptr<Transcript> t, ProviderConfig cfg,
                                   CacheMode mode)
    : inner_(std::move(inner)), transcript_(std::move(t)), cfg_(std::move(cfg)), mode_(mode) {}

std::string CachedCompletion::complete(const std::string& prompt, uint64_t sample_seed) {
  const std::string payload = completion_payload(cfg_, prompt, sample_seed);
  const std::string key = Transcript::key_for("completion", cfg_.model_name, payload);
  if (auto hit = transcript_->lookup(key)) return *hit;
  if (mode_ == CacheMode::ReplayStrict)
    throw ProviderError("strict replay: completion cache miss for key " + key);
  std::string response = inner_->complete(prompt, sample_seed);
  transcript_->store(key, payload, response, inner_->last_attempts(), cfg_.temperature);
  return response;
}

CachedEmbedding::CachedEmbedding(std::shared_ptr<EmbeddingProvider> inner,
                                 std::shared_ptr<Transcript> t, ProviderConfig cfg,
                                 CacheMode mode)
    : inner_(std::move(inner)), transcript_(std::move(t)), cfg_(std::move(cfg)), mode_(mode) {}

std::vector<double> CachedEmbedding::embed(const std::string& text) {
  const std::string payload = embedding_payload(cfg_, text);
  const std::string key = Transcript::key_for("embedding", cfg_.model_name, payload);
  if (auto hit = transcript_->lookup(key)) {
    json j = json::parse(*hit);
    return j.get<std::vector<double>>();
  }
  if (mode_ == CacheMode::ReplayStrict)
    throw ProviderError("strict replay: embedding cache miss for key " + key);
  auto vec = inner_->embed(text);
  transcript_->store(key, payload, json(vec).dump(), 1, cfg_.temperature);
  return vec;
}

CachedCrossScorer::CachedCrossScorer(std::shared_ptr<CrossScorer> inner,
                                     std::shared_ptr<Transcript> t, ProviderConfig cfg,
                                     CacheMode mode)
    : inner_(std::move(inner)), transcript_(std::move(t)), cfg_(std::move(cfg)), mode_(mode) {}

double CachedCrossScorer::score(const std::string& a, const std::string& b) {
  const std::string payload = cross_payload(cfg_, a, b);
  const std::string key = Transcript::key_for("cross", cfg_.model_name, payload);
  if (auto hit = transcript_->lookup(key)) return std::stod(*hit);
  if (mode_ == CacheMode::ReplayStrict)
    throw ProviderError("strict replay: cross-score cache miss for key " + key);
  double s = inner_->score(a, b);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", s);
  transcript_->store(key, payload, buf, 1, cfg_.temperature);
  return s;
}

double ClampingCrossScorer::score(const std::string& a, const std::string& b) {
  double s = inner_->score(a, b);
  if (s < 0.0 || s > 1.0) {
    ++warnings_;
    std::fprintf(stderr, "warning: cross score %.4f outside [0,1], clamped\n", s);
    s = std::min(1.0, std::max(0.0, s));
  }
  return s;
}

// --- HTTP ----------------------------------------------------------------------

namespace {

struct HttpResult {
  int status = 0;
  std::string body;
  bool transport_error = false;
};

std::mutex g_rate_mutex;
std::chrono::steady_clock::time_point g_last_dispatch{};

void rate_limit_wait(double rps) {
  if (rps <= 0.0) return;
  std::lock_guard<std::mutex> lock(g_rate_mutex);
  auto min_gap = std::chrono::duration<double>(1.0 / rps);
  auto now = std::chrono::steady_clock::now();
  auto next = g_last_dispatch + std::chrono::duration_cast<std::chrono::steady_clock::duration>(min_gap);
  if (now < next) std::this_thread::sleep_until(next);
  g_last_dispatch = std::chrono::steady_clock::now();
}

HttpResult http_post_once(const ProviderConfig& cfg, const std::string& path,
                          const std::string& body) {
  rate_limit_wait(cfg.rate_limit);
  httplib::Client cli(cfg.base_url);
  cli.set_connection_timeout(0, cfg.timeout_ms * 1000);
  cli.set_read_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);
  httplib::Headers headers;
  if (!cfg.api_key_env.empty()) {
    const char* key = std::getenv(cfg.api_key_env.c_str());
    if (!key)
      throw ProviderError("api key env var not set: " + cfg.api_key_env);
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  auto res = cli.Post(path, headers, body, "application/json");
  if (!res) return HttpResult{0, "", true};
  return HttpResult{res->status, res->body, false};
}

// POST with exponential backoff on transient failures (5xx, 429, transport).
std::string http_post(const ProviderConfig& cfg, const std::string& path,
                      const std::string& body, int* attempts_out) {
  int attempts = 0;
  std::string last_error;
  while (attempts < std::max(1, cfg.max_retries)) {
    ++attempts;
    HttpResult r = http_post_once(cfg, path, body);
    if (!r.transport_error && r.status == 200) {
      if (attempts_out) *attempts_out = attempts;
      return r.body;
    }
    if (!r.transport_error && (r.status == 401 || r.status == 403))
      throw ProviderError("auth failure (HTTP " + std::to_string(r.status) + ") from " +
                          cfg.base_url);
    bool transient = r.transport_error || r.status >= 500 || r.status == 429;
    last_error = r.transport_error ? "transport error"
                                   : "HTTP " + std::to_string(r.status) + ": " + r.body;
    if (!transient) throw ProviderError("request failed: " + last_error);
    if (attempts < cfg.max_retries)
      std::this_thread::sleep_for(
          std::chrono::milliseconds(cfg.retry_base_ms * (1 << (attempts - 1))));
  }
  if (attempts_out) *attempts_out = attempts;
  throw ProviderError("exhausted " + std::to_string(cfg.max_retries) + " retries: " +
                      last_error);
}

}  // namespace

std::string HttpCompletionProvider::complete(const std::string& prompt, uint64_t sample_seed) {
  std::string body = completion_payload(cfg_, prompt, sample_seed);
  std::string resp = http_post(cfg_, "/v1/chat/completions", body, &attempts_);
  try {
    json j = json::parse(resp);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw ProviderError(std::string("malformed completion response: ") + e.what());
  }
}

std::vector<double> HttpEmbeddingProvider::embed(const std::string& text) {
  if (text.empty()) throw ProviderError("cannot embed empty text");
  std::string body = embedding_payload(cfg_, text);
  std::string resp = http_post(cfg_, "/v1/embeddings", body, nullptr);
  try {
    json j = json::parse(resp);
    auto vec = j.at("data").at(0).at("embedding").get<std::vector<double>>();
    if (vec.empty()) throw ProviderError("provider returned empty embedding");
    for (double v : vec)
      if (!std::isfinite(v)) throw ProviderError("provider returned non-finite embedding");
    return vec;
  } catch (const json::exception& e) {
    throw ProviderError(std::string("malformed embedding response: ") + e.what());
  }
}

double HttpCrossScorer::score(const std::string& a, const std::string& b) {
  std::string body = cross_payload(cfg_, a, b);
  std::string resp = http_post(cfg_, "/v1/cross_score", body, nullptr);
  try {
    json j = json::parse(resp);
    return j.at("score").get<double>();
  } catch (const json::exception& e) {
    throw ProviderError(std::string("malformed cross-score response: ") + e.what());
  }
}

// --- mocks ----------------------------------------------------------------------

std::vector<double> MockEmbedder::embed(const std::string& text) {
  if (text.empty()) throw ProviderError("cannot embed empty text");
  std::vector<double> acc(dim_, 0.0);
  for (const auto& tok : whitespace_tokens(casefold(text))) {
    std::mt19937_64 rng(mix_seed(0x9e3779b97f4a7c15ULL, tok));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> v(dim_);
    double norm = 0.0;
    for (int i = 0; i < dim_; ++i) {
      v[i] = gauss(rng);
      norm += v[i] * v[i];
    }
    norm = std::sqrt(norm);
    for (int i = 0; i < dim_; ++i) acc[i] += v[i] / norm;
  }
  double norm = 0.0;
  for (double v : acc) norm += v * v;
  norm = std::sqrt(norm);
  if (norm == 0.0) throw ProviderError("mock embedding degenerated to zero vector");
  for (double& v : acc) v /= norm;
  return acc;
}

double MockCrossScorer::score(const std::string& a, const std::string& b) {
  auto ta = whitespace_tokens(casefold(a));
  auto tb = whitespace_tokens(casefold(b));
  std::unordered_set<std::string> sa(ta.begin(), ta.end());
  std::unordered_set<std::string> sb(tb.begin(), tb.end());
  if (sa.empty() && sb.empty()) return 1.0;
  size_t inter = 0;
  for (const auto& t : sa) inter += sb.count(t);
  size_t uni = sa.size() + sb.size() - inter;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

TableCompletion::TableCompletion(std::vector<std::pair<std::string, std::string>> entries)
    : table_(std::move(entries)) {}

std::string TableCompletion::complete(const std::string& prompt, uint64_t) {
  for (const auto& [k, v] : table_)
    if (prompt.find(k) != std::string::npos) return v;
  throw ProviderError("no table entry matches prompt");
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty())
    throw ValidationError("cosine: dimension mismatch or empty vectors");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0)
    throw ValidationError("cosine undefined for zero-vector embedding");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace qrisk

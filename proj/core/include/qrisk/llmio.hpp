#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace qrisk {

struct ProviderConfig {
  std::string kind = "mock";     // "mock" or "http"
  std::string base_url;          // http only
  std::string api_key_env;       // name of the env var holding the key; never the key
  std::string model_name = "mock-model";
  double temperature = 1.0;      // recorded in every transcript entry
  int timeout_ms = 30000;
  int max_retries = 3;
  int retry_base_ms = 100;       // exponential backoff base
  double rate_limit = 0.0;       // requests/second; 0 disables the limiter
};

// Text completion. sample_seed is part of the request payload so repeated
// draws at temperature 1.0 stay distinguishable under the transcript cache.
class CompletionProvider {
 public:
  virtual ~CompletionProvider() = default;
  virtual std::string complete(const std::string& prompt, uint64_t sample_seed) = 0;
  virtual int last_attempts() const { return 1; }
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<double> embed(const std::string& text) = 0;
};

// Probability-like relevance score in [0,1]; asymmetric (query, passage).
class CrossScorer {
 public:
  virtual ~CrossScorer() = default;
  virtual double score(const std::string& a, const std::string& b) = 0;
};

// --- Transcript cache ------------------------------------------------------

// Content-addressed store under a cache directory: one single-line JSON file
// per entry, named by the SHA-256 of (provider kind, model, canonical payload).
class Transcript {
 public:
  explicit Transcript(std::string cache_dir);

  std::optional<std::string> lookup(const std::string& key) const;
  void store(const std::string& key, const std::string& request_payload,
             const std::string& response, int attempts, double temperature);
  bool contains(const std::string& key) const;
  const std::string& dir() const { return dir_; }

  static std::string key_for(const std::string& provider_kind, const std::string& model,
                             const std::string& canonical_payload);

 private:
  std::string path_for(const std::string& key) const;
  std::string dir_;
};

enum class CacheMode { Bypass, Record, ReplayStrict };

// Canonical request payloads (sorted keys, stable number formatting). These
// are the cache-key inputs, shared by providers and test fixtures.
std::string completion_payload(const ProviderConfig& cfg, const std::string& prompt,
                               uint64_t sample_seed);
std::string embedding_payload(const ProviderConfig& cfg, const std::string& text);
std::string cross_payload(const ProviderConfig& cfg, const std::string& a,
                          const std::string& b);

std::string completion_cache_key(const ProviderConfig& cfg, const std::string& prompt,
                                 uint64_t sample_seed);
std::string embedding_cache_key(const ProviderConfig& cfg, const std::string& text);
std::string cross_cache_key(const ProviderConfig& cfg, const std::string& a,
                            const std::string& b);

// --- Cache-aware wrappers ---------------------------------------------------

class CachedCompletion : public CompletionProvider {
 public:
  CachedCompletion(std::shared_ptr<CompletionProvider> inner, std::shared_ptr<Transcript> t,
                   ProviderConfig cfg, CacheMode mode);
  std::string complete(const std::string& prompt, uint64_t sample_seed) override;

 private:
  std::shared_ptr<CompletionProvider> inner_;
  std::shared_ptr<Transcript> transcript_;
  ProviderConfig cfg_;
  CacheMode mode_;
};

class CachedEmbedding : public EmbeddingProvider {
 public:
  CachedEmbedding(std::shared_ptr<EmbeddingProvider> inner, std::shared_ptr<Transcript> t,
                  ProviderConfig cfg, CacheMode mode);
  std::vector<double> embed(const std::string& text) override;

 private:
  std::shared_ptr<EmbeddingProvider> inner_;
  std::shared_ptr<Transcript> transcript_;
  ProviderConfig cfg_;
  CacheMode mode_;
};

class CachedCrossScorer : public CrossScorer {
 public:
  CachedCrossScorer(std::shared_ptr<CrossScorer> inner, std::shared_ptr<Transcript> t,
                    ProviderConfig cfg, CacheMode mode);
  double score(const std::string& a, const std::string& b) override;

 private:
  std::shared_ptr<CrossScorer> inner_;
  std::shared_ptr<Transcript> transcript_;
  ProviderConfig cfg_;
  CacheMode mode_;
};

// Clamps out-of-range scores into [0,1] and counts each clamp as a warning.
class ClampingCrossScorer : public CrossScorer {
 public:
  explicit ClampingCrossScorer(std::shared_ptr<CrossScorer> inner) : inner_(std::move(inner)) {}
  double score(const std::string& a, const std::string& b) override;
  int clamp_warnings() const { return warnings_; }

 private:
  std::shared_ptr<CrossScorer> inner_;
  int warnings_ = 0;
};

// --- HTTP providers (OpenAI-style JSON over HTTP) ---------------------------

class HttpCompletionProvider : public CompletionProvider {
 public:
  explicit HttpCompletionProvider(ProviderConfig cfg) : cfg_(std::move(cfg)) {}
  std::string complete(const std::string& prompt, uint64_t sample_seed) override;
  int last_attempts() const override { return attempts_; }

 private:
  ProviderConfig cfg_;
  int attempts_ = 1;
};

class HttpEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingProvider(ProviderConfig cfg) : cfg_(std::move(cfg)) {}
  std::vector<double> embed(const std::string& text) override;

 private:
  ProviderConfig cfg_;
};

class HttpCrossScorer : public CrossScorer {
 public:
  explicit HttpCrossScorer(ProviderConfig cfg) : cfg_(std::move(cfg)) {}
  double score(const std::string& a, const std::string& b) override;

 private:
  ProviderConfig cfg_;
};

// --- Deterministic offline mocks --------------------------------------------

// Bag-of-tokens embedding: each token hashes to a fixed random unit vector,
// the sum is normalized. Shared tokens give high cosine; empty text errors.
class MockEmbedder : public EmbeddingProvider {
 public:
  explicit MockEmbedder(int dim = 64) : dim_(dim) {}
  std::vector<double> embed(const std::string& text) override;

 private:
  int dim_;
};

// Token-set Jaccard overlap as a stand-in relevance probability.
class MockCrossScorer : public CrossScorer {
 public:
  double score(const std::string& a, const std::string& b) override;
};

// Fixed prompt -> response table; unknown prompts error.
class TableCompletion : public CompletionProvider {
 public:
  explicit TableCompletion(std::vector<std::pair<std::string, std::string>> entries);
  std::string complete(const std::string& prompt, uint64_t sample_seed) override;

 private:
  std::vector<std::pair<std::string, std::string>> table_;
};

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace qrisk

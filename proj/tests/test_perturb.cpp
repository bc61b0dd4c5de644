#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "qrisk/errors.hpp"
#include "qrisk/perturb.hpp"
#include "support/tmpdir.hpp"

using namespace qrisk;

namespace {

// providers scripted with fixed outputs
class FixedEmbedder : public EmbeddingProvider {
 public:
  explicit FixedEmbedder(double cosine_with_other = 1.0) : cos_(cosine_with_other) {}
  std::vector<double> embed(const std::string& text) override {
    if (text.empty()) throw ProviderError("empty");
    // two-dimensional embedding: base text at (1,0); others rotated to give cos_
    if (text == "base") return {1.0, 0.0};
    return {cos_, std::sqrt(std::max(0.0, 1.0 - cos_ * cos_))};
  }

 private:
  double cos_;
};

class FixedCross : public CrossScorer {
 public:
  explicit FixedCross(double ab, double ba) : ab_(ab), ba_(ba) {}
  double score(const std::string& a, const std::string&) override {
    return a == "base" ? ab_ : ba_;
  }

 private:
  double ab_, ba_;
};

Query make_query(const std::string& text) {
  Query q;
  q.id = "q";
  q.text = text;
  q.scenario = Scenario::Abstractive;
  q.dataset = "d";
  return q;
}

}  // namespace

TEST_SUITE("perturb") {

TEST_CASE("similarity config invariants") {
  SimilarityConfig cfg;
  CHECK(cfg.lambda_bi == doctest::Approx(0.6));
  CHECK(cfg.lambda_cross == doctest::Approx(0.4));
  CHECK(cfg.threshold == doctest::Approx(0.85));
  CHECK(cfg.max_accepted == 6);
  cfg.validate();

  SimilarityConfig bad = cfg;
  bad.lambda_bi = 0.7;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = cfg;
  bad.lambda_cross = -0.1;
  bad.lambda_bi = 1.1;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("hybrid similarity arithmetic") {
  SimilarityConfig cfg;
  SUBCASE("identity case scores 1") {
    FixedEmbedder emb(1.0);
    FixedCross cross(1.0, 1.0);
    CHECK(hybrid_similarity("base", "base", emb, cross, cfg) == doctest::Approx(1.0));
  }
  SUBCASE("hand arithmetic: 0.6*0.9 + 0.4*0.8 = 0.86") {
    FixedEmbedder emb(0.9);
    FixedCross cross(0.8, 0.8);
    CHECK(hybrid_similarity("base", "other", emb, cross, cfg) ==
          doctest::Approx(0.86).epsilon(1e-12));
  }
  SUBCASE("orthogonal and irrelevant scores 0") {
    FixedEmbedder emb(0.0);
    FixedCross cross(0.0, 0.0);
    CHECK(hybrid_similarity("base", "other", emb, cross, cfg) == doctest::Approx(0.0));
  }
  SUBCASE("asymmetric cross term is symmetrized") {
    FixedEmbedder emb(0.5);
    FixedCross cross(1.0, 0.5);  // P(a,b)=1, P(b,a)=0.5
    double s_ab = hybrid_similarity("base", "other", emb, cross, cfg);
    CHECK(s_ab == doctest::Approx(0.6 * 0.5 + 0.4 * 0.75));
  }
}

TEST_CASE("hybrid similarity is symmetric with deterministic providers") {
  SimilarityConfig cfg;
  MockEmbedder emb;
  MockCrossScorer cross;
  const char* pairs[][2] = {
      {"alpha beta gamma", "alpha beta delta"},
      {"one two three four", "one two three four five"},
      {"completely different words", "another unrelated sentence"},
  };
  for (auto& p : pairs) {
    double ab = hybrid_similarity(p[0], p[1], emb, cross, cfg);
    double ba = hybrid_similarity(p[1], p[0], emb, cross, cfg);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
  }
}

TEST_CASE("zero-vector embeddings are reported") {
  class ZeroEmbedder : public EmbeddingProvider {
   public:
    std::vector<double> embed(const std::string&) override { return {0.0, 0.0}; }
  };
  ZeroEmbedder emb;
  FixedCross cross(1.0, 1.0);
  SimilarityConfig cfg;
  CHECK_THROWS_AS(hybrid_similarity("a", "b", emb, cross, cfg), ValidationError);
}

TEST_CASE("neighborhood keeps the first max_accepted passing candidates in order") {
  // candidate k scores high unless k is 1 or 4 (0-based), mirroring a stream
  // where two draws fail the gate
  SimilarityConfig cfg;
  MockEmbedder emb;
  MockCrossScorer cross;
  Query q = make_query("alpha beta gamma delta epsilon zeta eta theta");
  auto generator = [&](const Query& query, int draw) -> std::string {
    if (draw == 1 || draw == 4) return "totally unrelated junk text";
    return query.text + " please" + std::to_string(draw);
  };
  Neighborhood hood = build_neighborhood(q, generator, emb, cross, cfg, 18);
  REQUIRE(hood.paraphrases.size() == 6);
  CHECK(hood.generation_attempts == 8);  // draws 0..7, two rejected
  CHECK_FALSE(hood.partial);
  // acceptance order equals generation order
  CHECK(hood.paraphrases[0].text.find("please0") != std::string::npos);
  CHECK(hood.paraphrases[1].text.find("please2") != std::string::npos);
  CHECK(hood.paraphrases[5].text.find("please7") != std::string::npos);
  for (const auto& p : hood.paraphrases) {
    CHECK(p.accepted);
    CHECK(p.similarity >= cfg.threshold);
  }
}

TEST_CASE("verbatim generator fills the neighborhood at similarity 1") {
  SimilarityConfig cfg;
  MockEmbedder emb;
  MockCrossScorer cross;
  Query q = make_query("repeat after me");
  auto generator = [](const Query& query, int) { return query.text; };
  Neighborhood hood = build_neighborhood(q, generator, emb, cross, cfg, 18);
  REQUIRE(hood.paraphrases.size() == 6);
  for (const auto& p : hood.paraphrases)
    CHECK(p.similarity == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("budget exhaustion with zero accepted leaves an empty neighborhood") {
  SimilarityConfig cfg;
  MockEmbedder emb;
  MockCrossScorer cross;
  Query q = make_query("alpha beta gamma delta");
  auto generator = [](const Query&, int) { return std::string("zzz qqq xxx"); };
  Neighborhood hood = build_neighborhood(q, generator, emb, cross, cfg, 18);
  CHECK(hood.paraphrases.empty());
  CHECK(hood.partial);
  CHECK(hood.generation_attempts == 18);
}

TEST_CASE("budget below max_accepted is rejected") {
  SimilarityConfig cfg;
  MockEmbedder emb;
  MockCrossScorer cross;
  auto generator = [](const Query& q, int) { return q.text; };
  CHECK_THROWS_AS(
      build_neighborhood(make_query("x y"), generator, emb, cross, cfg, 3),
      ValidationError);
}

TEST_CASE("lowering the threshold never shrinks the accepted set") {
  MockEmbedder emb;
  MockCrossScorer cross;
  Query q = make_query("one two three four five six seven");
  auto generator = [&](const Query& query, int draw) -> std::string {
    // progressively longer suffixes lower similarity across draws
    std::string extra;
    for (int k = 0; k < draw; ++k) extra += " filler" + std::to_string(k);
    return query.text + extra;
  };
  SimilarityConfig strict;
  strict.threshold = 0.9;
  SimilarityConfig loose;
  loose.threshold = 0.6;
  auto strict_hood = build_neighborhood(q, generator, emb, cross, strict, 18);
  auto loose_hood = build_neighborhood(q, generator, emb, cross, loose, 18);
  CHECK(loose_hood.paraphrases.size() >= strict_hood.paraphrases.size());
}

TEST_CASE("gold answers never influence the neighborhood") {
  SimilarityConfig cfg;
  MockEmbedder emb;
  MockCrossScorer cross;
  auto generator = [](const Query& query, int draw) {
    return query.text + " please" + std::to_string(draw);
  };
  Query with_gold = make_query("alpha beta gamma delta epsilon");
  with_gold.gold = std::vector<std::string>{"the truth"};
  Query without_gold = with_gold;
  without_gold.gold.reset();

  auto a = build_neighborhood(with_gold, generator, emb, cross, cfg, 18);
  auto b = build_neighborhood(without_gold, generator, emb, cross, cfg, 18);
  REQUIRE(a.paraphrases.size() == b.paraphrases.size());
  for (size_t i = 0; i < a.paraphrases.size(); ++i) {
    CHECK(a.paraphrases[i].text == b.paraphrases[i].text);
    CHECK(a.paraphrases[i].similarity == b.paraphrases[i].similarity);
  }
}

TEST_CASE("neighborhood persistence round-trips") {
  testsupport::TmpDir tmp("hoods");
  Neighborhood h;
  h.source_id = "q1";
  h.partial = true;
  h.generation_attempts = 9;
  h.paraphrases.push_back({"q1", "first variant", 0.93, true});
  h.paraphrases.push_back({"q1", "second variant", 0.88, true});
  save_neighborhoods({h}, tmp.file("n.jsonl"));
  auto back = load_neighborhoods(tmp.file("n.jsonl"));
  REQUIRE(back.size() == 1);
  CHECK(back[0].source_id == "q1");
  CHECK(back[0].partial);
  CHECK(back[0].generation_attempts == 9);
  REQUIRE(back[0].paraphrases.size() == 2);
  CHECK(back[0].paraphrases[1].text == "second variant");
  CHECK(back[0].paraphrases[1].similarity == doctest::Approx(0.88));
}

}  // TEST_SUITE

#include <doctest.h>

#include <cmath>
#include <random>

#include "qrisk/errors.hpp"
#include "qrisk/mockmodel.hpp"
#include "qrisk/proxy.hpp"
#include "support/oracles.hpp"
#include "support/tmpdir.hpp"

using namespace qrisk;

namespace {

Query gold_query(std::vector<std::string> gold, std::string text = "What is it?") {
  Query q;
  q.id = "q";
  q.text = std::move(text);
  q.scenario = Scenario::Abstractive;
  q.dataset = "d";
  q.gold = std::move(gold);
  return q;
}

}  // namespace

TEST_SUITE("proxy") {

TEST_CASE("weights validate as a convex combination") {
  ProxyWeights w;
  CHECK(w.w_llm == doctest::Approx(0.6));
  CHECK(w.w_fuzz == doctest::Approx(0.3));
  CHECK(w.w_bleu == doctest::Approx(0.1));
  w.validate();
  ProxyWeights bad{0.5, 0.3, 0.1};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("judge grades via the template against the gold set") {
  ScriptedCompletion judge;
  CHECK(judge_answer(gold_query({"Cormac McCarthy"}, "Who wrote \"The Road\"?"),
                     "Cormac McCarthy.", judge)
            .correct);
  CHECK_FALSE(judge_answer(gold_query({"100\xC2\xB0"
                                       "C"},
                                      "What is the boiling point of water at sea level?"),
                           "90\xC2\xB0"
                           "C",
                           judge)
                  .correct);
  CHECK(judge_answer(gold_query({"11", "13", "17", "19"},
                                "Name one prime number greater than 10."),
                     "13.", judge)
            .correct);
  CHECK_THROWS_AS(judge_answer(gold_query({}), "x", judge), ValidationError);
}

TEST_CASE("fuzz dissimilarity") {
  CHECK(fuzz_dissimilarity("exact match", {"exact match"}) == doctest::Approx(0.0));
  CHECK(fuzz_dissimilarity("Exact  Match", {"exact match"}) ==
        doctest::Approx(0.0));  // case/whitespace folded
  CHECK(fuzz_dissimilarity("xyz", {"abc"}) == doctest::Approx(1.0));
  // one indel between color and colour: 1 - 2*5/(5+6) = 1/11
  CHECK(fuzz_dissimilarity("color", {"colour"}) == doctest::Approx(1.0 / 11.0));
  CHECK_THROWS_AS(fuzz_dissimilarity("x", {}), ValidationError);

  SUBCASE("gold permutation and exact-member floor") {
    std::vector<std::string> gold = {"alpha", "beta", "gamma"};
    double d1 = fuzz_dissimilarity("betax", gold);
    std::vector<std::string> shuffled = {"gamma", "alpha", "beta"};
    CHECK(fuzz_dissimilarity("betax", shuffled) == doctest::Approx(d1));
    gold.push_back("betax");
    CHECK(fuzz_dissimilarity("betax", gold) == doctest::Approx(0.0));
  }
}

TEST_CASE("bleu-1 dissimilarity") {
  CHECK(bleu1_dissimilarity("the cat sat down", {"the cat sat down"}) ==
        doctest::Approx(0.0));
  CHECK(bleu1_dissimilarity("xyz abc", {"one two"}) == doctest::Approx(1.0));
  // precision 1 with brevity penalty exp(1 - 4/3)
  CHECK(bleu1_dissimilarity("the cat sat", {"the cat sat down"}) ==
        doctest::Approx(1.0 - std::exp(1.0 - 4.0 / 3.0)).epsilon(1e-12));
  CHECK(bleu1_dissimilarity("", {"anything"}) == doctest::Approx(1.0));
  // clipping: repeated candidate token counts at most its reference count
  CHECK(bleu1_dissimilarity("the the the", {"the cat"}) ==
        doctest::Approx(1.0 - (1.0 / 3.0) * 1.0));
  SUBCASE("best reference wins") {
    CHECK(bleu1_dissimilarity("the cat", {"entirely different", "the cat"}) ==
          doctest::Approx(0.0));
  }
}

TEST_CASE("score_paraphrase composes the convex proxy") {
  ScriptedCompletion judge;
  ProxyWeights w;
  SUBCASE("all-wrong answer maxes the proxy") {
    // no shared characters at all, so the fuzzy term saturates too
    ProxyScore s = score_paraphrase(gold_query({"qqq"}), "xyxyvuvu", w, judge);
    CHECK(s.s_llm == 1);
    CHECK(s.s_fuzz == doctest::Approx(1.0));
    CHECK(s.s_bleu == doctest::Approx(1.0));
    CHECK(s.h_hat == doctest::Approx(1.0));
    CHECK(s.hallucinated);
  }
  SUBCASE("exact answer floors the proxy") {
    ProxyScore s = score_paraphrase(gold_query({"waypoint-7"}), "waypoint-7", w, judge);
    CHECK(s.s_llm == 0);
    CHECK(s.h_hat == doctest::Approx(0.0));
    CHECK_FALSE(s.hallucinated);
  }
  SUBCASE("judge-only wrongness crosses the 0.5 threshold") {
    // weights (0.6, 0.3, 0.1): s_llm alone contributes 0.6 > 0.5
    CHECK(w.w_llm * 1 + w.w_fuzz * 0 + w.w_bleu * 0 > kHallucinationThreshold);
    CHECK(w.w_fuzz * 1 + w.w_bleu * 1 < kHallucinationThreshold);
  }
}

TEST_CASE("h_hat is monotone in each component") {
  ProxyWeights w;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    double f = u(rng), b = u(rng);
    double base = w.w_fuzz * f + w.w_bleu * b;
    CHECK(base <= w.w_llm * 1 + w.w_fuzz * f + w.w_bleu * b);
    double f2 = std::min(1.0, f + u(rng));
    CHECK(w.w_fuzz * f2 + w.w_bleu * b >= base);
  }
}

TEST_CASE("label_query aggregates the tally over the neighborhood") {
  ScriptedCompletion judge;
  ProxyWeights w;
  Query q = gold_query({"waypoint-3"}, "Which waypoint is listed for route 3?");
  Neighborhood hood;
  hood.source_id = q.id;
  for (int i = 0; i < 6; ++i)
    hood.paraphrases.push_back({q.id, "variant " + std::to_string(i), 0.9, true});

  SUBCASE("0 of 6 wrong is Safe") {
    std::vector<std::string> answers(6, "waypoint-3");
    RiskLabel label = label_query(q, hood, answers, w, judge);
    CHECK(label.tally == 0);
    CHECK(label.category == RiskCategory::Safe);
    CHECK(label.m == 6);
  }
  SUBCASE("2 of 6 wrong is Borderline") {
    std::vector<std::string> answers(6, "waypoint-3");
    answers[1] = answers[4] = "detour-3";
    RiskLabel label = label_query(q, hood, answers, w, judge);
    CHECK(label.tally == 2);
    CHECK(label.category == RiskCategory::Borderline);
  }
  SUBCASE("6 of 6 wrong is Risky") {
    std::vector<std::string> answers(6, "detour-3");
    RiskLabel label = label_query(q, hood, answers, w, judge);
    CHECK(label.tally == 6);
    CHECK(label.category == RiskCategory::Risky);
  }
  SUBCASE("empty neighborhood errors") {
    Neighborhood empty;
    empty.source_id = q.id;
    CHECK_THROWS_AS(label_query(q, empty, {}, w, judge), ValidationError);
  }
  SUBCASE("answer count must match") {
    std::vector<std::string> answers(5, "waypoint-3");
    CHECK_THROWS_AS(label_query(q, hood, answers, w, judge), ValidationError);
  }
}

TEST_CASE("roc_auc matches the pairwise oracle exactly") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    int n = 10 + static_cast<int>(rng() % 150);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    bool any[2] = {false, false};
    for (int i = 0; i < n; ++i) {
      // quantize to force score ties
      scores[i] = std::floor(u(rng) * 8) / 8.0;
      labels[i] = rng() % 2;
      any[labels[i]] = true;
    }
    if (!any[0] || !any[1]) continue;
    CHECK(std::abs(roc_auc(scores, labels) - oracle::roc_auc(scores, labels)) <= 1e-12);
  }
  CHECK_THROWS_AS(roc_auc({0.1, 0.2}, {1, 1}), ValidationError);
}

TEST_CASE("simplex sweep") {
  SUBCASE("grid size for step 0.1 is 66") {
    std::vector<SweepSample> labeled;
    std::mt19937_64 rng(2);
    for (int i = 0; i < 40; ++i)
      labeled.push_back({static_cast<double>(rng() % 2), 0.5, 0.5, (rng() % 2) == 1});
    auto points = simplex_sweep(labeled, 0.1);
    CHECK(points.size() == 66);
  }
  SUBCASE("a perfect llm-judge signal puts (1,0,0) at AUC 1") {
    std::vector<SweepSample> labeled;
    for (int i = 0; i < 30; ++i) {
      bool pos = i % 2 == 0;
      // s_llm separates perfectly; the other components are anti-signals
      labeled.push_back({pos ? 1.0 : 0.0, pos ? 0.2 : 0.9, 0.5, pos});
    }
    auto points = simplex_sweep(labeled, 0.25);
    CHECK(points.front().auc == doctest::Approx(1.0));
    bool judge_only_perfect = false;
    for (const auto& p : points)
      if (p.weights.w_llm == 1.0 && p.auc == 1.0) judge_only_perfect = true;
    CHECK(judge_only_perfect);
    // fuzz-dominated mixes rank worse than the top of the list
    CHECK(points.back().auc < points.front().auc);
    // sorted descending by AUC
    for (size_t i = 1; i < points.size(); ++i) CHECK(points[i - 1].auc >= points[i].auc);
  }
  SUBCASE("labels independent of all components stay near 0.5") {
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<SweepSample> labeled;
    for (int i = 0; i < 200; ++i)
      labeled.push_back({u(rng), u(rng), u(rng), (rng() % 2) == 1});
    for (const auto& p : simplex_sweep(labeled, 0.1)) {
      CHECK(p.auc > 0.4);
      CHECK(p.auc < 0.6);
    }
  }
  SUBCASE("degenerate inputs are rejected") {
    std::vector<SweepSample> one_class = {{1, 1, 1, true}, {0, 0, 0, true}};
    CHECK_THROWS_AS(simplex_sweep(one_class, 0.5), ValidationError);
    std::vector<SweepSample> ok = {{1, 1, 1, true}, {0, 0, 0, false}};
    CHECK_THROWS_AS(simplex_sweep(ok, 0.3), ValidationError);  // does not divide 1
    CHECK_THROWS_AS(simplex_sweep({}, 0.5), ValidationError);
  }
}

TEST_CASE("score persistence round-trips") {
  testsupport::TmpDir tmp("scores");
  std::vector<ScoredParaphrase> scores;
  ProxyScore s;
  s.s_llm = 1;
  s.s_fuzz = 0.25;
  s.s_bleu = 0.75;
  s.h_hat = 0.75;
  s.hallucinated = true;
  scores.push_back({"q1", 0, s});
  save_scores(scores, tmp.file("s.jsonl"));
  auto back = load_scores(tmp.file("s.jsonl"));
  REQUIRE(back.size() == 1);
  CHECK(back[0].query_id == "q1");
  CHECK(back[0].score.s_fuzz == doctest::Approx(0.25));
  CHECK(back[0].score.hallucinated);
}

}  // TEST_SUITE

#include <doctest.h>

#include <cmath>
#include <random>

#include "qrisk/diagnostics.hpp"
#include "qrisk/errors.hpp"
#include "support/oracles.hpp"

using namespace qrisk;

namespace {

DesignMatrix blank_design(int n) {
  DesignMatrix d;
  d.n = n;
  for (FeatureName f : binary_feature_names()) d.feature_names.push_back(to_string(f));
  for (FeatureName f : numeric_feature_names()) d.feature_names.push_back(to_string(f));
  d.dataset_levels = {"d0"};
  d.scenario_levels = {"s0"};
  d.features.assign(static_cast<size_t>(n) * kNumFeatures, 0.0);
  d.dataset_index.assign(n, 0);
  d.scenario_index.assign(n, 0);
  d.outcome.assign(n, 0);
  return d;
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("ecdf separation basics") {
  SUBCASE("identical groups separate by zero") {
    std::vector<double> preds = {0.1, 0.4, 0.7, 0.1, 0.4, 0.7};
    std::vector<int> presence = {1, 1, 1, 0, 0, 0};
    EcdfSeparation s = ecdf_separation(preds, presence);
    CHECK(s.ks == doctest::Approx(0.0));
    CHECK(s.delta_median == doctest::Approx(0.0));
    CHECK(s.tied);
    CHECK_FALSE(s.risk_up);  // ties record as risk_down
  }
  SUBCASE("disjoint supports separate fully") {
    std::vector<double> preds = {1.0, 1.0, 0.0, 0.0};
    std::vector<int> presence = {1, 1, 0, 0};
    EcdfSeparation s = ecdf_separation(preds, presence);
    CHECK(s.ks == doctest::Approx(1.0));
    CHECK(s.delta_median == doctest::Approx(1.0));
    CHECK(s.risk_up);
  }
  SUBCASE("three-point brute force gives 0.5") {
    std::vector<double> preds = {0.2, 0.8, 0.4};
    std::vector<int> presence = {1, 1, 0};
    EcdfSeparation s = ecdf_separation(preds, presence);
    CHECK(s.ks == doctest::Approx(0.5));
    CHECK(s.n_present == 2);
    CHECK(s.n_absent == 1);
  }
  SUBCASE("empty group errors") {
    CHECK_THROWS_AS(ecdf_separation({0.1, 0.2}, {1, 1}), ValidationError);
  }
}

TEST_CASE("ks matches the counting oracle and is transform-invariant") {
  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    int n = 20 + static_cast<int>(rng() % 120);
    std::vector<double> preds(n);
    std::vector<int> presence(n);
    std::vector<double> a, b;
    for (int i = 0; i < n; ++i) {
      preds[i] = std::floor(u(rng) * 16) / 16.0;  // force ties
      presence[i] = (rng() % 3) != 0;
      (presence[i] ? a : b).push_back(preds[i]);
    }
    if (a.empty() || b.empty()) continue;
    EcdfSeparation s = ecdf_separation(preds, presence);
    CHECK(std::abs(s.ks - oracle::ks_distance(a, b)) <= 1e-12);
    CHECK(std::abs(s.delta_median - (oracle::median(a) - oracle::median(b))) <= 1e-12);

    // strictly monotone transform of both groups preserves KS
    std::vector<double> warped(n);
    for (int i = 0; i < n; ++i) warped[i] = std::atan(3.0 * preds[i] - 1.0);
    CHECK(ecdf_separation(warped, presence).ks == doctest::Approx(s.ks).epsilon(1e-12));
  }
}

TEST_CASE("flipping the presence vector negates delta and keeps ks") {
  std::vector<double> preds = {0.1, 0.9, 0.3, 0.7, 0.5, 0.2, 0.8};
  std::vector<int> presence = {1, 0, 1, 0, 1, 0, 1};
  std::vector<int> flipped(presence.size());
  for (size_t i = 0; i < presence.size(); ++i) flipped[i] = 1 - presence[i];
  EcdfSeparation s1 = ecdf_separation(preds, presence);
  EcdfSeparation s2 = ecdf_separation(preds, flipped);
  CHECK(s1.ks == doctest::Approx(s2.ks).epsilon(1e-15));
  CHECK(s1.delta_median == doctest::Approx(-s2.delta_median).epsilon(1e-15));
}

TEST_CASE("rank correlations") {
  SUBCASE("strictly increasing gives rho = tau = 1") {
    // tie-free ordinal outcome: one item per level
    std::vector<double> x = {1, 2, 3};
    std::vector<int> y = {0, 1, 2};
    RankCorrelation rc = rank_correlation(x, y);
    CHECK(*rc.spearman_rho == doctest::Approx(1.0));
    CHECK(*rc.kendall_tau == doctest::Approx(1.0));

    // outcome ties attenuate tau-b below 1 but keep it strongly positive
    std::vector<double> x6 = {1, 2, 3, 4, 5, 6};
    std::vector<int> y6 = {0, 0, 1, 1, 2, 2};
    RankCorrelation rc6 = rank_correlation(x6, y6);
    CHECK(*rc6.spearman_rho > 0.9);
    CHECK(*rc6.kendall_tau > 0.85);
    CHECK(*rc6.p_value < 0.01);
  }
  SUBCASE("constant input is flagged undefined") {
    std::vector<double> x = {2, 2, 2, 2};
    std::vector<int> y = {0, 1, 2, 0};
    RankCorrelation rc = rank_correlation(x, y);
    CHECK_FALSE(rc.spearman_rho.has_value());
    CHECK_FALSE(rc.p_adjusted.has_value());
  }
  SUBCASE("seeded permutation stays near zero") {
    std::mt19937_64 rng(2024);
    const int n = 1000;
    std::vector<double> x(n);
    std::vector<int> y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = static_cast<double>(i);
      y[i] = i % 3;
    }
    std::shuffle(x.begin(), x.end(), rng);
    RankCorrelation rc = rank_correlation(x, y);
    CHECK(std::abs(*rc.spearman_rho) < 0.08);
  }
  SUBCASE("invariant under strictly monotone transforms of the values") {
    std::mt19937_64 rng(301);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = 80;
    std::vector<double> x(n), warped(n);
    std::vector<int> y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = std::floor(u(rng) * 6) / 6.0;
      warped[i] = std::exp(3.0 * x[i]);  // strictly increasing, tie-preserving
      y[i] = static_cast<int>(rng() % 3);
    }
    RankCorrelation a = rank_correlation(x, y);
    RankCorrelation b = rank_correlation(warped, y);
    CHECK(*a.spearman_rho == doctest::Approx(*b.spearman_rho).epsilon(1e-12));
    CHECK(*a.kendall_tau == doctest::Approx(*b.kendall_tau).epsilon(1e-12));
  }
  SUBCASE("matches the counting oracles exactly") {
    std::mt19937_64 rng(88);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 25; ++trial) {
      int n = 10 + static_cast<int>(rng() % 150);
      std::vector<double> x(n);
      std::vector<int> y(n);
      for (int i = 0; i < n; ++i) {
        x[i] = std::floor(u(rng) * 10) / 10.0;
        y[i] = static_cast<int>(rng() % 3);
      }
      RankCorrelation rc = rank_correlation(x, y);
      if (!rc.spearman_rho) continue;
      CHECK(std::abs(*rc.spearman_rho - oracle::spearman(x, y)) <= 1e-12);
      CHECK(std::abs(*rc.kendall_tau - oracle::kendall_tau_b(x, y)) <= 1e-12);
    }
  }
}

TEST_CASE("benjamini-hochberg on a known fixture") {
  // classic worked example: sorted p * m / rank with running minimum
  std::vector<double> p = {0.01, 0.04, 0.03, 0.005};
  auto adj = benjamini_hochberg(p);
  CHECK(adj[3] == doctest::Approx(0.02));   // 0.005 * 4 / 1
  CHECK(adj[0] == doctest::Approx(0.02));   // 0.01 * 4 / 2
  CHECK(adj[2] == doctest::Approx(0.04));   // 0.03 * 4 / 3
  CHECK(adj[1] == doctest::Approx(0.04));   // 0.04 * 4 / 4
  for (double a : adj) CHECK(a <= 1.0);
}

TEST_CASE("family-level correlations adjust across defined features only") {
  std::vector<std::vector<double>> cols = {
      {1, 2, 3, 4, 5, 6, 7, 8},
      {5, 5, 5, 5, 5, 5, 5, 5},  // constant: undefined
      {8, 7, 6, 5, 4, 3, 2, 1},
  };
  std::vector<int> y = {0, 0, 1, 1, 1, 2, 2, 2};
  auto rcs = rank_correlations(cols, y);
  REQUIRE(rcs.size() == 3);
  CHECK(rcs[0].p_adjusted.has_value());
  CHECK_FALSE(rcs[1].p_adjusted.has_value());
  CHECK(rcs[2].p_adjusted.has_value());
}

TEST_CASE("risk vs length binning") {
  SUBCASE("all risky yields rate 1 in every emitted stratum") {
    std::vector<LengthItem> items;
    for (int i = 0; i < 600; ++i) items.push_back({i + 1, 1, i % 2});
    auto bins = risk_vs_length(items, 3, 50);
    REQUIRE(!bins.empty());
    for (const auto& b : bins) {
      REQUIRE(b.rate_present.has_value());
      CHECK(*b.rate_present == doctest::Approx(1.0));
      CHECK(*b.rate_absent == doctest::Approx(1.0));
    }
  }
  SUBCASE("equal-mass arithmetic: 3000 items over 30 bins is 100 per bin") {
    std::vector<LengthItem> items;
    for (int i = 0; i < 3000; ++i) items.push_back({i + 1, 0, 1});
    auto bins = risk_vs_length(items, 30, 50);
    REQUIRE(bins.size() == 30);
    for (const auto& b : bins) CHECK(b.n_present == 100);
  }
  SUBCASE("a stratum below min_bin is suppressed") {
    std::vector<LengthItem> items;
    for (int i = 0; i < 49; ++i) items.push_back({i, 1, 1});
    for (int i = 0; i < 51; ++i) items.push_back({i, 0, 0});
    auto bins = risk_vs_length(items, 1, 50);
    REQUIRE(bins.size() == 1);
    CHECK(bins[0].n_present == 49);
    CHECK_FALSE(bins[0].rate_present.has_value());
    CHECK(bins[0].rate_absent.has_value());
  }
  SUBCASE("wilson interval brackets the empirical rate") {
    auto [lo, hi] = wilson_interval(30, 100);
    CHECK(lo > 0.2);
    CHECK(lo < 0.3);
    CHECK(hi > 0.3);
    CHECK(hi < 0.42);
    auto [l0, h0] = wilson_interval(0, 50);
    CHECK(l0 == doctest::Approx(0.0));
    CHECK(h0 > 0.0);
  }
}

TEST_CASE("reliability and ece") {
  SUBCASE("perfectly calibrated bins give ece 0") {
    // 10 items per bin value; outcomes realize the predicted rate exactly
    std::vector<double> preds;
    std::vector<int> outs;
    for (int b = 0; b < 10; ++b) {
      double p = b / 10.0;
      for (int k = 0; k < 10; ++k) {
        preds.push_back(p);
        outs.push_back(k < b ? 1 : 0);
      }
    }
    ReliabilityResult r = reliability(preds, outs, 10);
    CHECK(r.ece == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("certain predictions with opposite outcomes give ece 1") {
    std::vector<double> preds(40, 1.0);
    std::vector<int> outs(40, 0);
    CHECK(reliability(preds, outs, 10).ece == doctest::Approx(1.0));
  }
  SUBCASE("constant predictor ece equals |mean outcome - constant|") {
    std::vector<double> preds(90, 0.3);
    std::vector<int> outs(90, 0);
    for (int i = 0; i < 54; ++i) outs[i] = 1;  // mean 0.6
    CHECK(reliability(preds, outs, 10).ece == doctest::Approx(0.3).epsilon(1e-12));
  }
  SUBCASE("matches the direct-summation oracle on random fixtures") {
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
      int n = 20 + static_cast<int>(rng() % 180);
      std::vector<double> preds(n);
      std::vector<int> outs(n);
      for (int i = 0; i < n; ++i) {
        preds[i] = u(rng);
        outs[i] = u(rng) < preds[i] ? 1 : 0;
      }
      ReliabilityResult r = reliability(preds, outs, 10);
      CHECK(std::abs(r.ece - oracle::ece(preds, outs, 10)) <= 1e-12);
      CHECK(r.ece >= 0.0);
      CHECK(r.ece <= 1.0);
    }
  }
  SUBCASE("requires n >= bins") {
    CHECK_THROWS_AS(reliability({0.5}, {1}, 10), ValidationError);
  }
}

TEST_CASE("propensity fit") {
  SUBCASE("independent treatment gives flat scores and full overlap") {
    DesignMatrix d = blank_design(2000);
    std::mt19937_64 rng(31);
    for (int r = 0; r < d.n; ++r) {
      for (int c = 0; c < kNumBinaryFeatures; ++c)
        d.features[static_cast<size_t>(r) * kNumFeatures + c] =
            static_cast<double>(rng() % 2);
    }
    PropensityResult res = propensity_fit(0, d);
    CHECK(res.overlap_share == doctest::Approx(1.0));
    for (double s : res.scores) {
      CHECK(s > 0.3);
      CHECK(s < 0.7);
    }
  }
  SUBCASE("deterministic treatment concentrates at the clip boundaries") {
    DesignMatrix d = blank_design(2000);
    std::mt19937_64 rng(33);
    for (int r = 0; r < d.n; ++r) {
      double v = static_cast<double>(rng() % 2);
      d.features[static_cast<size_t>(r) * kNumFeatures + 0] = v;  // treatment
      d.features[static_cast<size_t>(r) * kNumFeatures + 1] = v;  // its mirror
    }
    PropensityResult res = propensity_fit(0, d);
    CHECK(res.overlap_share < 0.05);
  }
  SUBCASE("logistic generator coefficients are recovered") {
    DesignMatrix d = blank_design(10000);
    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double phi0 = -0.4, phi1 = 0.9, phi2 = -1.2;
    for (int r = 0; r < d.n; ++r) {
      double x1 = static_cast<double>(rng() % 2);
      double x2 = static_cast<double>(rng() % 2);
      d.features[static_cast<size_t>(r) * kNumFeatures + 1] = x1;
      d.features[static_cast<size_t>(r) * kNumFeatures + 2] = x2;
      double p = 1.0 / (1.0 + std::exp(-(phi0 + phi1 * x1 + phi2 * x2)));
      d.features[static_cast<size_t>(r) * kNumFeatures + 0] = u(rng) < p ? 1.0 : 0.0;
    }
    PropensityResult res = propensity_fit(0, d);
    // verify the recovered scores against the generator probabilities
    double max_err = 0.0;
    for (int r = 0; r < d.n; ++r) {
      double x1 = d.feat(r, 1), x2 = d.feat(r, 2);
      double p = 1.0 / (1.0 + std::exp(-(phi0 + phi1 * x1 + phi2 * x2)));
      max_err = std::max(max_err, std::abs(res.scores[r] - p));
    }
    CHECK(max_err < 0.15);
  }
  SUBCASE("single-group treatment errors") {
    DesignMatrix d = blank_design(100);
    CHECK_THROWS_AS(propensity_fit(0, d), ValidationError);
  }
}

TEST_CASE("ipw uplift") {
  SUBCASE("constant propensity reduces to the naive mean difference") {
    std::mt19937_64 rng(41);
    std::vector<double> outcome(200);
    std::vector<int> treatment(200);
    for (size_t i = 0; i < outcome.size(); ++i) {
      outcome[i] = static_cast<double>(rng() % 2);
      treatment[i] = static_cast<int>(rng() % 2);
    }
    std::vector<double> scores(200, 0.5);
    double naive = oracle::naive_mean_diff(outcome, treatment);
    CHECK(std::abs(ate_ipw(outcome, treatment, scores) - naive) <= 1e-12);
    CHECK(std::abs(ate_stratified(outcome, treatment, scores, 10) - naive) <= 1e-12);
  }
  SUBCASE("constant outcome has zero effect") {
    std::vector<double> outcome(50, 0.7);
    std::vector<int> treatment(50, 0);
    for (int i = 0; i < 25; ++i) treatment[i] = 1;
    std::vector<double> scores(50, 0.4);
    CHECK(ate_ipw(outcome, treatment, scores) == doctest::Approx(0.0));
  }
  SUBCASE("six-item hand fixture") {
    std::vector<double> outcome = {1, 0, 1, 0, 1, 0};
    std::vector<int> treatment = {1, 1, 1, 0, 0, 0};
    std::vector<double> scores = {0.8, 0.4, 0.5, 0.2, 0.5, 0.6};
    // treated: (1/.8 + 1/.5) / (1/.8 + 1/.4 + 1/.5) = 3.25/5.75
    // control: (1/.5) / (1/.8 + 1/.5 + 1/.4) = 2/5.75 -> ate = 5/23
    CHECK(ate_ipw(outcome, treatment, scores) ==
          doctest::Approx(5.0 / 23.0).epsilon(1e-12));
  }
}

TEST_CASE("stratified uplift") {
  SUBCASE("identical outcomes within strata cancel") {
    std::vector<double> outcome;
    std::vector<int> treatment;
    std::vector<double> scores;
    for (int b = 0; b < 5; ++b)
      for (int k = 0; k < 8; ++k) {
        outcome.push_back(b % 2);
        treatment.push_back(k % 2);
        scores.push_back(0.1 + 0.2 * b);
      }
    CHECK(ate_stratified(outcome, treatment, scores, 5) == doctest::Approx(0.0));
  }
  SUBCASE("twenty-item two-strata hand fixture") {
    // low stratum: treated mean 1.0 (2 items), control mean 0.5 (8 items), n=10
    // high stratum: treated mean 0.25 (8 items), control mean 0.0 (2 items), n=10
    // ate = 0.5 * 0.5 + 0.5 * 0.25 = 0.375
    std::vector<double> outcome;
    std::vector<int> treatment;
    std::vector<double> scores;
    for (int k = 0; k < 2; ++k) { outcome.push_back(1.0); treatment.push_back(1); scores.push_back(0.2); }
    for (int k = 0; k < 8; ++k) { outcome.push_back(k < 4 ? 1.0 : 0.0); treatment.push_back(0); scores.push_back(0.2); }
    for (int k = 0; k < 8; ++k) { outcome.push_back(k < 2 ? 1.0 : 0.0); treatment.push_back(1); scores.push_back(0.8); }
    for (int k = 0; k < 2; ++k) { outcome.push_back(0.0); treatment.push_back(0); scores.push_back(0.8); }
    CHECK(ate_stratified(outcome, treatment, scores, 2) ==
          doctest::Approx(0.375).epsilon(1e-12));
  }
  SUBCASE("strata missing a group are dropped and weights renormalized") {
    std::vector<double> outcome = {1, 1, 0, 0, 1, 1};
    std::vector<int> treatment = {1, 0, 1, 0, 1, 1};  // high stratum has no control
    std::vector<double> scores = {0.2, 0.2, 0.2, 0.2, 0.9, 0.9};
    // only the low stratum contributes: mean(1,0|T=1) - mean(1,0|T=0) = 0
    CHECK(ate_stratified(outcome, treatment, scores, 2) == doctest::Approx(0.0));
  }
  SUBCASE("no valid stratum errors") {
    std::vector<double> outcome = {1, 0};
    std::vector<int> treatment = {1, 1};
    std::vector<double> scores = {0.5, 0.5};
    CHECK_THROWS_AS(ate_stratified(outcome, treatment, scores, 2), ValidationError);
  }
}

TEST_CASE("uplift gate follows the overlap share") {
  std::mt19937_64 rng(47);
  DesignMatrix d = blank_design(2000);
  std::vector<double> outcome(d.n);
  for (int r = 0; r < d.n; ++r) {
    double indep = static_cast<double>(rng() % 2);
    double driver = static_cast<double>(rng() % 2);
    double near_det = (rng() % 100) < 3 ? 1.0 - driver : driver;
    d.features[static_cast<size_t>(r) * kNumFeatures + 0] = indep;
    d.features[static_cast<size_t>(r) * kNumFeatures + 1] = near_det;
    d.features[static_cast<size_t>(r) * kNumFeatures + 2] = driver;
    outcome[r] = static_cast<double>(rng() % 2);
  }
  PropensityResult indep_res = propensity_with_uplifts(0, d, outcome);
  CHECK(indep_res.overlap_share == doctest::Approx(1.0));
  CHECK(indep_res.ate_ipw.has_value());
  CHECK(indep_res.ate_strat.has_value());

  PropensityResult det_res = propensity_with_uplifts(1, d, outcome);
  CHECK(det_res.overlap_share < 0.45);
  CHECK_FALSE(det_res.ate_ipw.has_value());
  CHECK_FALSE(det_res.ate_strat.has_value());
}

}  // TEST_SUITE

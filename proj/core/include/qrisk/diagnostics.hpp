#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qrisk/ordmodel.hpp"

namespace qrisk {

// --- ECDF separation -----------------------------------------------------------

struct EcdfSeparation {
  std::string feature;
  double ks = 0.0;            // sup-norm distance between the two ECDFs
  double delta_median = 0.0;  // median(present) - median(absent)
  int n_present = 0;
  int n_absent = 0;
  bool risk_up = false;  // delta_median > 0; ties recorded as risk_down
  bool tied = false;
};

// KS via merged-grid sup-difference; medians use the midpoint convention for
// even counts. Both groups must be non-empty.
EcdfSeparation ecdf_separation(const std::vector<double>& predictions,
                               const std::vector<int>& presence);

// --- rank correlations ------------------------------------------------------------

enum class PAdjust { BenjaminiHochberg, Bonferroni, None };

struct RankCorrelation {
  std::optional<double> spearman_rho;  // average ranks for ties
  std::optional<double> kendall_tau;   // tau-b
  std::optional<double> p_value;       // Spearman t-approximation, two-sided
  std::optional<double> p_adjusted;    // set by the family-level call
};

// Single feature against the ordinal outcome; constant input leaves the
// fields unset. Requires n >= 3.
RankCorrelation rank_correlation(const std::vector<double>& values,
                                 const std::vector<int>& outcome);

// Family-level: one correlation per feature column with p-values adjusted
// across the family (21 features in the standard battery).
std::vector<RankCorrelation> rank_correlations(
    const std::vector<std::vector<double>>& feature_values, const std::vector<int>& outcome,
    PAdjust adjust = PAdjust::BenjaminiHochberg);

std::vector<double> benjamini_hochberg(const std::vector<double>& pvalues);

// --- risk vs length -----------------------------------------------------------------

struct LengthItem {
  int token_length = 0;
  int risky = 0;     // 1{y = Risky}
  int presence = 0;  // feature present indicator
};

struct LengthBinRow {
  double center = 0.0;  // mean token length within the bin
  int n_present = 0;
  int n_absent = 0;
  // per-stratum empirical risky rate with Wilson 95% bands; strata with fewer
  // than min_bin items are suppressed (left unset)
  std::optional<double> rate_present, lo_present, hi_present;
  std::optional<double> rate_absent, lo_absent, hi_absent;
};

std::vector<LengthBinRow> risk_vs_length(const std::vector<LengthItem>& items, int bins = 30,
                                         int min_bin = 50);

// Wilson 95% score interval for a binomial proportion.
std::pair<double, double> wilson_interval(int successes, int n);

// --- calibration ---------------------------------------------------------------------

struct ReliabilityBin {
  double mean_pred = 0.0;
  double observed = 0.0;
  int n = 0;
};

struct ReliabilityResult {
  std::vector<ReliabilityBin> curve;
  double ece = 0.0;  // sum over bins of (n_b/n) * |observed_b - mean_pred_b|
};

// Equal-mass binning by prediction; requires n >= bins.
ReliabilityResult reliability(const std::vector<double>& predictions,
                              const std::vector<int>& outcomes, int bins = 10);

// --- propensity and uplifts -------------------------------------------------------------

struct PropensityOptions {
  double clip = 1e-3;             // scores bounded to [clip, 1-clip]
  double overlap_alpha = 0.05;    // overlap share counts scores in [alpha, 1-alpha]
  double report_threshold = 0.45; // uplifts reported only at/above this overlap
  int strata = 10;
  int max_iters = 100;
};

struct PropensityResult {
  std::string feature;
  std::vector<double> scores;  // clipped pi-hat per design row
  double overlap_share = 0.0;
  int n_present = 0;
  int n_absent = 0;
  std::optional<double> ate_ipw;
  std::optional<double> ate_strat;
};

// Logistic regression of the binary feature column on all other feature
// columns plus dataset/scenario indicators (excluding the treatment itself).
PropensityResult propensity_fit(int feature_col, const DesignMatrix& design,
                                const PropensityOptions& opts = {});

// Hajek-normalized IPW contrast.
double ate_ipw(const std::vector<double>& outcome, const std::vector<int>& treatment,
               const std::vector<double>& scores);

// Quantile-stratified contrast; strata are score-value quantiles (equal score
// values share a stratum), strata missing a group are dropped and the
// remaining weights renormalized by stratum size.
double ate_stratified(const std::vector<double>& outcome, const std::vector<int>& treatment,
                      const std::vector<double>& scores, int strata = 10);

// Fits the propensity model and attaches uplifts when the overlap gate passes.
PropensityResult propensity_with_uplifts(int feature_col, const DesignMatrix& design,
                                         const std::vector<double>& outcome,
                                         const PropensityOptions& opts = {});

// --- report bundle writers ----------------------------------------------------------------

void write_separations_csv(const std::vector<EcdfSeparation>& rows, const std::string& path);
void write_correlations_csv(const std::vector<std::string>& feature_names,
                            const std::vector<RankCorrelation>& rows,
                            const std::string& path);
void write_calibration_csv(const std::vector<std::pair<std::string, ReliabilityResult>>& rows,
                           const std::string& path);
void write_length_curves_csv(
    const std::vector<std::pair<std::string, std::vector<LengthBinRow>>>& rows,
    const std::string& path);
void write_propensity_csv(const std::vector<PropensityResult>& rows, const std::string& path);

}  // namespace qrisk

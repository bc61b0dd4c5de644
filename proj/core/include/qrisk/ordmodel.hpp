#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "qrisk/corpus.hpp"
#include "qrisk/features.hpp"

namespace qrisk {

enum class ModelSpec { FeatureOnly, Full };

const char* to_string(ModelSpec s);
ModelSpec model_spec_from_string(const std::string& s);

// Row-major design: 21 feature columns (17 binary + 4 scaled numeric),
// per-row dataset/scenario level indices, and the ordinal outcome.
// Level lists are sorted; index 0 is the dropped reference level.
struct DesignMatrix {
  int n = 0;
  std::vector<double> features;  // n * kNumFeatures
  std::vector<int> dataset_index;
  std::vector<int> scenario_index;
  std::vector<int> outcome;  // y in {0,1,2}
  std::vector<std::string> feature_names;
  std::vector<std::string> dataset_levels;
  std::vector<std::string> scenario_levels;

  double feat(int row, int col) const { return features[static_cast<size_t>(row) * kNumFeatures + col]; }
  void validate() const;
  int outcome_classes() const;
};

// Joins corpus rows with their (scaled) feature vectors and risk labels;
// queries missing either are skipped.
DesignMatrix make_design(const Corpus& corpus, const std::vector<FeatureVector>& features,
                         const std::vector<RiskLabel>& labels);

DesignMatrix subset_rows(const DesignMatrix& data, const std::vector<int>& rows);
// Drops one dataset and re-levels the remaining indicators.
DesignMatrix drop_dataset(const DesignMatrix& data, const std::string& dataset);

// Cumulative-logit model: log Pr(Y<=k)/Pr(Y>k) = tau_k - eta,
// eta = x'beta + alpha_d + gamma_s, ordered cutpoints tau0 < tau1.
struct OrdinalModel {
  ModelSpec spec = ModelSpec::FeatureOnly;
  std::vector<double> beta;   // one per feature column
  std::vector<double> alpha;  // per retained dataset level (levels[1..])
  std::vector<double> gamma;  // per retained scenario level
  double tau0 = -1.0;
  double tau1 = 1.0;
  double lambda_reg = 1e-4;
  uint64_t seed = 0;
  bool converged = false;
  std::vector<std::string> feature_names;
  std::vector<std::string> dataset_levels;
  std::vector<std::string> scenario_levels;
  NumericStats numeric_stats;  // standardization frozen at fit time
};

struct ClassProbabilities {
  double p_safe = 0.0;
  double p_borderline = 0.0;
  double p_risky = 0.0;
};

// --- likelihood -----------------------------------------------------------------

// Mean negative log-likelihood plus lambda_reg * ||beta||^2 (penalty on beta
// only). Log-sum-exp-stable; finite parameters never produce NaN.
double nll(const OrdinalModel& model, const DesignMatrix& data);

// Unconstrained training parameterization: theta = [beta, alpha, gamma, tau0,
// delta] with tau1 = tau0 + exp(delta), so tau0 < tau1 holds structurally.
struct PackedProblem {
  const DesignMatrix& data;
  ModelSpec spec;
  double lambda_reg;

  int n_alpha() const;
  int n_gamma() const;
  int dim() const;

  double value(const std::vector<double>& theta) const;
  std::vector<double> gradient(const std::vector<double>& theta) const;

  std::vector<double> pack(const OrdinalModel& model) const;
  OrdinalModel unpack(const std::vector<double>& theta) const;
};

// Gradient of the *unpenalized* mean NLL in natural parameters
// [beta, alpha, gamma, tau0, tau1]; used for observed-information SEs.
std::vector<double> natural_gradient(const OrdinalModel& model, const DesignMatrix& data);

// --- fitting --------------------------------------------------------------------

struct FitOptions {
  double lambda_reg = 1e-4;
  uint64_t seed = 0;
  int max_iters = 10000;
  int eval_every = 10;
  int patience = 20;       // early-stopping patience in validation evaluations
  double lr = 0.1;
  double val_fraction = 0.10;  // seeded split when no validation set is given
};

// Adam on PackedProblem with early stopping on validation NLL. Deterministic
// given the seed; single-class data is rejected.
OrdinalModel fit(const DesignMatrix& data, ModelSpec spec, const FitOptions& opts = {},
                 const DesignMatrix* validation = nullptr);

// --- inference --------------------------------------------------------------------

struct PredictRow {
  std::array<double, kNumFeatures> features{};
  std::string dataset;   // unknown/empty maps to the reference level
  std::string scenario;
};

double linear_predictor(const OrdinalModel& model, const PredictRow& row);
ClassProbabilities predict(const OrdinalModel& model, const PredictRow& row);
ClassProbabilities predict_design_row(const OrdinalModel& model, const DesignMatrix& data,
                                      int row);

// --- reporting ----------------------------------------------------------------------

struct CoefficientRow {
  std::string name;
  double coef = 0.0;
  std::optional<double> se;
  std::optional<double> z;
  std::optional<double> p;
  double odds_ratio = 1.0;
};

// Per-coefficient table: estimate, observed-information SE, z, two-sided
// normal p, OR = exp(coef). Singular information leaves SE/z/p unset.
std::vector<CoefficientRow> report_table(const OrdinalModel& model, const DesignMatrix& data);
void save_coefficient_csv(const std::vector<CoefficientRow>& rows, const std::string& path);

// --- robustness --------------------------------------------------------------------

struct LodoResult {
  std::vector<std::string> held_datasets;           // one entry per completed hold
  std::vector<std::vector<double>> beta_per_hold;   // [hold][feature]
  std::vector<double> pooled_beta;
  std::vector<double> mean_beta;    // across holds, per feature
  std::vector<double> stddev_beta;  // population stddev across holds
  std::vector<std::string> skipped_holds;
};

LodoResult lodo(const DesignMatrix& data, ModelSpec spec, const FitOptions& opts);
void save_lodo_csv(const LodoResult& result, const std::vector<std::string>& feature_names,
                   const std::string& path);

// --- persistence ----------------------------------------------------------------------

void save_model(const OrdinalModel& model, const std::string& path);
OrdinalModel load_model(const std::string& path);

}  // namespace qrisk

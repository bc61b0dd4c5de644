#include "qrisk/ordmodel.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>

#include "qrisk/errors.hpp"

namespace qrisk {

using nlohmann::json;

const char* to_string(ModelSpec s) {
  return s == ModelSpec::FeatureOnly ? "FeatureOnly" : "Full";
}

ModelSpec model_spec_from_string(const std::string& s) {
  if (s == "FeatureOnly") return ModelSpec::FeatureOnly;
  if (s == "Full") return ModelSpec::Full;
  throw ValidationError("unknown model spec: \"" + s + "\"");
}

// --- design matrix ------------------------------------------------------------

void DesignMatrix::validate() const {
  if (n < 0) throw ValidationError("negative row count");
  if (features.size() != static_cast<size_t>(n) * kNumFeatures)
    throw ValidationError("feature block size mismatch");
  if (dataset_index.size() != static_cast<size_t>(n) ||
      scenario_index.size() != static_cast<size_t>(n) ||
      outcome.size() != static_cast<size_t>(n))
    throw ValidationError("column length mismatch");
  for (int i = 0; i < n; ++i) {
    if (outcome[i] < 0 || outcome[i] > 2)
      throw ValidationError("outcome outside {0,1,2} at row " + std::to_string(i));
    if (dataset_index[i] < 0 ||
        dataset_index[i] >= static_cast<int>(dataset_levels.size()))
      throw ValidationError("dataset index out of range at row " + std::to_string(i));
    if (scenario_index[i] < 0 ||
        scenario_index[i] >= static_cast<int>(scenario_levels.size()))
      throw ValidationError("scenario index out of range at row " + std::to_string(i));
  }
  for (double v : features)
    if (!std::isfinite(v)) throw ValidationError("non-finite feature cell");
}

int DesignMatrix::outcome_classes() const {
  std::set<int> classes(outcome.begin(), outcome.end());
  return static_cast<int>(classes.size());
}

DesignMatrix make_design(const Corpus& corpus, const std::vector<FeatureVector>& features,
                         const std::vector<RiskLabel>& labels) {
  std::unordered_map<std::string, const FeatureVector*> by_id;
  for (const auto& fv : features) by_id[fv.query_id] = &fv;
  std::unordered_map<std::string, const RiskLabel*> label_by_id;
  for (const auto& l : labels) label_by_id[l.query_id] = &l;

  // level lists from the rows actually joined, alphabetically; [0] = reference
  std::set<std::string> dsets, scens;
  for (const auto& q : corpus.queries) {
    if (!by_id.count(q.id) || !label_by_id.count(q.id)) continue;
    dsets.insert(q.dataset);
    scens.insert(to_string(q.scenario));
  }

  DesignMatrix d;
  d.dataset_levels.assign(dsets.begin(), dsets.end());
  d.scenario_levels.assign(scens.begin(), scens.end());
  for (FeatureName f : binary_feature_names()) d.feature_names.push_back(to_string(f));
  for (FeatureName f : numeric_feature_names()) d.feature_names.push_back(to_string(f));

  auto level_index = [](const std::vector<std::string>& levels, const std::string& v) {
    return static_cast<int>(std::lower_bound(levels.begin(), levels.end(), v) -
                            levels.begin());
  };

  for (const auto& q : corpus.queries) {
    auto fit = by_id.find(q.id);
    auto lit = label_by_id.find(q.id);
    if (fit == by_id.end() || lit == label_by_id.end()) continue;
    const FeatureVector& fv = *fit->second;
    for (FeatureName f : binary_feature_names())
      d.features.push_back(fv.binary_at(f));
    for (FeatureName f : numeric_feature_names())
      d.features.push_back(fv.scaled_at(f));
    d.dataset_index.push_back(level_index(d.dataset_levels, q.dataset));
    d.scenario_index.push_back(level_index(d.scenario_levels, to_string(q.scenario)));
    d.outcome.push_back(static_cast<int>(lit->second->category));
    ++d.n;
  }
  d.validate();
  return d;
}

DesignMatrix subset_rows(const DesignMatrix& data, const std::vector<int>& rows) {
  DesignMatrix out;
  out.feature_names = data.feature_names;
  out.dataset_levels = data.dataset_levels;
  out.scenario_levels = data.scenario_levels;
  for (int r : rows) {
    if (r < 0 || r >= data.n) throw ValidationError("row subset index out of range");
    for (int c = 0; c < kNumFeatures; ++c) out.features.push_back(data.feat(r, c));
    out.dataset_index.push_back(data.dataset_index[r]);
    out.scenario_index.push_back(data.scenario_index[r]);
    out.outcome.push_back(data.outcome[r]);
    ++out.n;
  }
  return out;
}

DesignMatrix drop_dataset(const DesignMatrix& data, const std::string& dataset) {
  auto it = std::find(data.dataset_levels.begin(), data.dataset_levels.end(), dataset);
  if (it == data.dataset_levels.end())
    throw ValidationError("dataset not present: " + dataset);
  int drop = static_cast<int>(it - data.dataset_levels.begin());

  DesignMatrix out;
  out.feature_names = data.feature_names;
  out.scenario_levels = data.scenario_levels;
  for (int i = 0; i < static_cast<int>(data.dataset_levels.size()); ++i)
    if (i != drop) out.dataset_levels.push_back(data.dataset_levels[i]);

  for (int r = 0; r < data.n; ++r) {
    if (data.dataset_index[r] == drop) continue;
    for (int c = 0; c < kNumFeatures; ++c) out.features.push_back(data.feat(r, c));
    int di = data.dataset_index[r];
    out.dataset_index.push_back(di > drop ? di - 1 : di);
    out.scenario_index.push_back(data.scenario_index[r]);
    out.outcome.push_back(data.outcome[r]);
    ++out.n;
  }
  return out;
}

// --- stable pieces ---------------------------------------------------------------

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + e^x) without overflow
double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double log_sigmoid(double x) { return -softplus(-x); }

// log(e^w - 1) for w > 0
double log_expm1(double w) {
  if (w > 700.0) return w;
  return std::log(std::expm1(w));
}

struct RowGrad {
  double dL_du = 0.0;  // d nll_i / d(tau0 - eta)
  double dL_dv = 0.0;  // d nll_i / d(tau1 - eta)
};

double row_nll(int y, double u, double v, double w) {
  switch (y) {
    case 0: return softplus(-u);
    case 2: return softplus(v);
    default:  // y == 1: p1 = sigma(u) * sigma(-v) * (e^w - 1)
      return -(log_sigmoid(u) + log_sigmoid(-v) + log_expm1(w));
  }
}

RowGrad row_grad(int y, double u, double v, double w) {
  RowGrad g;
  switch (y) {
    case 0:
      g.dL_du = -sigmoid(-u);
      break;
    case 2:
      g.dL_dv = sigmoid(v);
      break;
    default: {
      double lw = log_expm1(w);
      g.dL_du = std::exp(log_sigmoid(-u) - log_sigmoid(-v) - lw);
      g.dL_dv = -std::exp(log_sigmoid(v) - log_sigmoid(u) - lw);
      break;
    }
  }
  return g;
}

double eta_design_row(const std::vector<double>& beta, const std::vector<double>& alpha,
                      const std::vector<double>& gamma, bool fixed_effects,
                      const DesignMatrix& data, int r) {
  double eta = 0.0;
  const double* x = &data.features[static_cast<size_t>(r) * kNumFeatures];
  for (int c = 0; c < kNumFeatures; ++c) eta += beta[c] * x[c];
  if (fixed_effects) {
    int di = data.dataset_index[r];
    if (di > 0 && di - 1 < static_cast<int>(alpha.size())) eta += alpha[di - 1];
    int si = data.scenario_index[r];
    if (si > 0 && si - 1 < static_cast<int>(gamma.size())) eta += gamma[si - 1];
  }
  return eta;
}

}  // namespace

// --- nll and gradients ---------------------------------------------------------------

double nll(const OrdinalModel& model, const DesignMatrix& data) {
  if (static_cast<int>(model.beta.size()) != kNumFeatures)
    throw ValidationError("model beta dimension mismatch");
  if (model.tau0 >= model.tau1) throw ValidationError("cutpoints must satisfy tau0 < tau1");
  bool fe = model.spec == ModelSpec::Full;
  if (fe) {
    if (model.alpha.size() + 1 != data.dataset_levels.size() ||
        model.gamma.size() + 1 != data.scenario_levels.size())
      throw ValidationError("fixed-effect dimension mismatch with design levels");
  }
  const double w = model.tau1 - model.tau0;
  double total = 0.0;
  for (int r = 0; r < data.n; ++r) {
    double eta = eta_design_row(model.beta, model.alpha, model.gamma, fe, data, r);
    total += row_nll(data.outcome[r], model.tau0 - eta, model.tau1 - eta, w);
  }
  double penalty = 0.0;
  for (double b : model.beta) penalty += b * b;
  return total / data.n + model.lambda_reg * penalty;
}

int PackedProblem::n_alpha() const {
  return spec == ModelSpec::Full ? static_cast<int>(data.dataset_levels.size()) - 1 : 0;
}

int PackedProblem::n_gamma() const {
  return spec == ModelSpec::Full ? static_cast<int>(data.scenario_levels.size()) - 1 : 0;
}

int PackedProblem::dim() const { return kNumFeatures + n_alpha() + n_gamma() + 2; }

std::vector<double> PackedProblem::pack(const OrdinalModel& model) const {
  std::vector<double> theta;
  theta.reserve(dim());
  theta.insert(theta.end(), model.beta.begin(), model.beta.end());
  theta.insert(theta.end(), model.alpha.begin(), model.alpha.end());
  theta.insert(theta.end(), model.gamma.begin(), model.gamma.end());
  theta.push_back(model.tau0);
  theta.push_back(std::log(model.tau1 - model.tau0));
  return theta;
}

OrdinalModel PackedProblem::unpack(const std::vector<double>& theta) const {
  if (static_cast<int>(theta.size()) != dim())
    throw ValidationError("packed parameter dimension mismatch");
  OrdinalModel m;
  m.spec = spec;
  m.lambda_reg = lambda_reg;
  m.beta.assign(theta.begin(), theta.begin() + kNumFeatures);
  int off = kNumFeatures;
  m.alpha.assign(theta.begin() + off, theta.begin() + off + n_alpha());
  off += n_alpha();
  m.gamma.assign(theta.begin() + off, theta.begin() + off + n_gamma());
  off += n_gamma();
  m.tau0 = theta[off];
  m.tau1 = theta[off] + std::exp(theta[off + 1]);
  m.feature_names = data.feature_names;
  m.dataset_levels = spec == ModelSpec::Full ? data.dataset_levels
                                             : std::vector<std::string>{};
  m.scenario_levels = spec == ModelSpec::Full ? data.scenario_levels
                                              : std::vector<std::string>{};
  return m;
}

double PackedProblem::value(const std::vector<double>& theta) const {
  OrdinalModel m = unpack(theta);
  return nll(m, data);
}

std::vector<double> PackedProblem::gradient(const std::vector<double>& theta) const {
  OrdinalModel m = unpack(theta);
  const bool fe = spec == ModelSpec::Full;
  const double delta = theta[dim() - 1];
  const double w = std::exp(delta);
  const double inv_n = 1.0 / data.n;

  std::vector<double> grad(dim(), 0.0);
  const int a_off = kNumFeatures;
  const int g_off = kNumFeatures + n_alpha();
  const int t_off = dim() - 2;

  for (int r = 0; r < data.n; ++r) {
    double eta = eta_design_row(m.beta, m.alpha, m.gamma, fe, data, r);
    RowGrad g = row_grad(data.outcome[r], m.tau0 - eta, m.tau1 - eta, w);
    double d_eta = -(g.dL_du + g.dL_dv);
    const double* x = &data.features[static_cast<size_t>(r) * kNumFeatures];
    for (int c = 0; c < kNumFeatures; ++c) grad[c] += d_eta * x[c] * inv_n;
    if (fe) {
      int di = data.dataset_index[r];
      if (di > 0) grad[a_off + di - 1] += d_eta * inv_n;
      int si = data.scenario_index[r];
      if (si > 0) grad[g_off + si - 1] += d_eta * inv_n;
    }
    grad[t_off] += (g.dL_du + g.dL_dv) * inv_n;  // tau0 appears in both u and v
    grad[t_off + 1] += g.dL_dv * w * inv_n;      // chain rule through tau1 = tau0 + e^delta
  }
  for (int c = 0; c < kNumFeatures; ++c) grad[c] += 2.0 * lambda_reg * m.beta[c];
  return grad;
}

std::vector<double> natural_gradient(const OrdinalModel& model, const DesignMatrix& data) {
  const bool fe = model.spec == ModelSpec::Full;
  const double w = model.tau1 - model.tau0;
  const int n_alpha = static_cast<int>(model.alpha.size());
  const int n_gamma = static_cast<int>(model.gamma.size());
  const int dim = kNumFeatures + n_alpha + n_gamma + 2;
  const double inv_n = 1.0 / data.n;

  std::vector<double> grad(dim, 0.0);
  const int a_off = kNumFeatures;
  const int g_off = kNumFeatures + n_alpha;
  const int t_off = dim - 2;

  for (int r = 0; r < data.n; ++r) {
    double eta = eta_design_row(model.beta, model.alpha, model.gamma, fe, data, r);
    RowGrad g = row_grad(data.outcome[r], model.tau0 - eta, model.tau1 - eta, w);
    double d_eta = -(g.dL_du + g.dL_dv);
    const double* x = &data.features[static_cast<size_t>(r) * kNumFeatures];
    for (int c = 0; c < kNumFeatures; ++c) grad[c] += d_eta * x[c] * inv_n;
    if (fe) {
      int di = data.dataset_index[r];
      if (di > 0) grad[a_off + di - 1] += d_eta * inv_n;
      int si = data.scenario_index[r];
      if (si > 0) grad[g_off + si - 1] += d_eta * inv_n;
    }
    grad[t_off] += g.dL_du * inv_n;
    grad[t_off + 1] += g.dL_dv * inv_n;
  }
  return grad;
}

// --- fitting ------------------------------------------------------------------------

namespace {

// Frequency-based cutpoint initialization keeps early iterations in a sane
// region even for skewed class mixes.
void init_cutpoints(const DesignMatrix& data, double& tau0, double& delta) {
  double n0 = 0, n01 = 0;
  for (int y : data.outcome) {
    if (y == 0) ++n0;
    if (y <= 1) ++n01;
  }
  double n = data.n;
  double p0 = std::clamp(n0 / n, 0.02, 0.98);
  double p01 = std::clamp(n01 / n, p0 + 0.01, 0.99);
  tau0 = std::log(p0 / (1.0 - p0));
  double tau1 = std::log(p01 / (1.0 - p01));
  delta = std::log(std::max(tau1 - tau0, 1e-3));
}

}  // namespace

OrdinalModel fit(const DesignMatrix& data, ModelSpec spec, const FitOptions& opts,
                 const DesignMatrix* validation) {
  data.validate();
  if (data.n == 0) throw ValidationError("cannot fit on an empty design");
  if (data.outcome_classes() < 2)
    throw ValidationError("cannot fit: outcome has a single class");

  // validation split by seeded shuffle when none supplied
  DesignMatrix train_local, val_local;
  const DesignMatrix* train = &data;
  const DesignMatrix* val = validation;
  if (val == nullptr) {
    std::vector<int> order(data.n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(opts.seed);
    std::shuffle(order.begin(), order.end(), rng);
    int n_val = std::max(1, static_cast<int>(std::floor(opts.val_fraction * data.n)));
    if (n_val >= data.n) n_val = data.n / 5 + (data.n < 5 ? 0 : 0);
    std::vector<int> val_rows(order.begin(), order.begin() + n_val);
    std::vector<int> train_rows(order.begin() + n_val, order.end());
    std::sort(val_rows.begin(), val_rows.end());
    std::sort(train_rows.begin(), train_rows.end());
    val_local = subset_rows(data, val_rows);
    train_local = subset_rows(data, train_rows);
    if (train_local.outcome_classes() < 2) {
      // tiny or degenerate split: train on everything, validate on everything
      train_local = data;
      val_local = data;
    }
    train = &train_local;
    val = &val_local;
  }

  PackedProblem prob{*train, spec, opts.lambda_reg};
  std::vector<double> theta(prob.dim(), 0.0);
  init_cutpoints(*train, theta[prob.dim() - 2], theta[prob.dim() - 1]);

  PackedProblem val_prob{*val, spec, 0.0};  // early stopping on unpenalized NLL

  std::vector<double> best_theta = theta;
  double best_val = val_prob.value(theta);
  bool stopped_early = false;

  // Adam with step-down restarts: each phase runs from the best parameters so
  // far at a smaller learning rate until validation NLL stops improving.
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  const double phase_lrs[] = {opts.lr, opts.lr / 5.0, opts.lr / 25.0};
  int iters_used = 0;
  for (double lr : phase_lrs) {
    if (iters_used >= opts.max_iters) break;
    theta = best_theta;
    std::vector<double> m(prob.dim(), 0.0), v(prob.dim(), 0.0);
    int stagnant = 0;
    stopped_early = false;
    for (int step = 1; iters_used < opts.max_iters; ++step, ++iters_used) {
      std::vector<double> g = prob.gradient(theta);
      for (int i = 0; i < prob.dim(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        double mhat = m[i] / (1.0 - std::pow(beta1, step));
        double vhat = v[i] / (1.0 - std::pow(beta2, step));
        theta[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
      if (step % opts.eval_every == 0) {
        double val_nll = val_prob.value(theta);
        if (val_nll < best_val - 1e-10) {
          best_val = val_nll;
          best_theta = theta;
          stagnant = 0;
        } else if (++stagnant >= opts.patience) {
          stopped_early = true;
          break;
        }
      }
    }
  }

  OrdinalModel model = prob.unpack(best_theta);
  model.seed = opts.seed;
  model.converged = stopped_early;
  if (!stopped_early)
    std::fprintf(stderr,
                 "warning: fit hit max_iters=%d without an early-stopping plateau; "
                 "returning best-so-far parameters\n",
                 opts.max_iters);
  return model;
}

// --- inference --------------------------------------------------------------------

double linear_predictor(const OrdinalModel& model, const PredictRow& row) {
  if (static_cast<int>(model.beta.size()) != kNumFeatures)
    throw ValidationError("model beta dimension mismatch");
  double eta = 0.0;
  for (int c = 0; c < kNumFeatures; ++c) eta += model.beta[c] * row.features[c];
  if (model.spec == ModelSpec::Full) {
    auto add_effect = [](const std::vector<std::string>& levels,
                         const std::vector<double>& coef, const std::string& value) {
      if (value.empty()) return 0.0;  // reference
      auto it = std::find(levels.begin(), levels.end(), value);
      if (it == levels.end() || it == levels.begin()) return 0.0;  // unknown/reference
      return coef[static_cast<size_t>(it - levels.begin()) - 1];
    };
    eta += add_effect(model.dataset_levels, model.alpha, row.dataset);
    eta += add_effect(model.scenario_levels, model.gamma, row.scenario);
  }
  return eta;
}

namespace {

ClassProbabilities class_probs(double tau0, double tau1, double eta) {
  double a = sigmoid(tau0 - eta);
  double b = sigmoid(tau1 - eta);
  ClassProbabilities p;
  p.p_safe = a;
  p.p_borderline = b - a;
  p.p_risky = 1.0 - b;
  return p;
}

}  // namespace

ClassProbabilities predict(const OrdinalModel& model, const PredictRow& row) {
  if (model.tau0 >= model.tau1) throw ValidationError("cutpoints must satisfy tau0 < tau1");
  return class_probs(model.tau0, model.tau1, linear_predictor(model, row));
}

ClassProbabilities predict_design_row(const OrdinalModel& model, const DesignMatrix& data,
                                      int row) {
  if (row < 0 || row >= data.n) throw ValidationError("design row out of range");
  bool fe = model.spec == ModelSpec::Full;
  double eta = eta_design_row(model.beta, model.alpha, model.gamma, fe, data, row);
  return class_probs(model.tau0, model.tau1, eta);
}

// --- reporting ----------------------------------------------------------------------

std::vector<CoefficientRow> report_table(const OrdinalModel& model, const DesignMatrix& data) {
  const int n_alpha = static_cast<int>(model.alpha.size());
  const int n_gamma = static_cast<int>(model.gamma.size());
  const int dim = kNumFeatures + n_alpha + n_gamma + 2;

  // observed information = Hessian of the total unpenalized NLL in natural
  // parameters, via central differences of the analytic gradient
  const double h = 1e-5;
  Eigen::MatrixXd H(dim, dim);
  OrdinalModel probe = model;
  auto set_param = [&](OrdinalModel& mm, int idx, double value) {
    if (idx < kNumFeatures) {
      mm.beta[idx] = value;
    } else if (idx < kNumFeatures + n_alpha) {
      mm.alpha[idx - kNumFeatures] = value;
    } else if (idx < kNumFeatures + n_alpha + n_gamma) {
      mm.gamma[idx - kNumFeatures - n_alpha] = value;
    } else if (idx == dim - 2) {
      mm.tau0 = value;
    } else {
      mm.tau1 = value;
    }
  };
  auto get_param = [&](const OrdinalModel& mm, int idx) -> double {
    if (idx < kNumFeatures) return mm.beta[idx];
    if (idx < kNumFeatures + n_alpha) return mm.alpha[idx - kNumFeatures];
    if (idx < kNumFeatures + n_alpha + n_gamma)
      return mm.gamma[idx - kNumFeatures - n_alpha];
    return idx == dim - 2 ? mm.tau0 : mm.tau1;
  };

  for (int j = 0; j < dim; ++j) {
    double orig = get_param(probe, j);
    set_param(probe, j, orig + h);
    std::vector<double> gp = natural_gradient(probe, data);
    set_param(probe, j, orig - h);
    std::vector<double> gm = natural_gradient(probe, data);
    set_param(probe, j, orig);
    for (int i = 0; i < dim; ++i) H(i, j) = (gp[i] - gm[i]) / (2.0 * h) * data.n;
  }
  H = 0.5 * (H + H.transpose()).eval();

  Eigen::FullPivLU<Eigen::MatrixXd> lu(H);
  bool invertible = lu.isInvertible();
  Eigen::MatrixXd cov;
  if (invertible) cov = lu.inverse();

  auto normal_two_sided_p = [](double z) {
    return std::erfc(std::abs(z) / std::sqrt(2.0));
  };

  std::vector<CoefficientRow> rows;
  auto push = [&](const std::string& name, double coef, int idx) {
    CoefficientRow r;
    r.name = name;
    r.coef = coef;
    r.odds_ratio = std::exp(coef);
    if (invertible) {
      double var = cov(idx, idx);
      if (std::isfinite(var) && var > 0.0) {
        r.se = std::sqrt(var);
        r.z = coef == 0.0 && *r.se == 0.0 ? 0.0 : coef / *r.se;
        r.p = coef == 0.0 ? 1.0 : normal_two_sided_p(*r.z);
      }
    }
    rows.push_back(std::move(r));
  };

  for (int c = 0; c < kNumFeatures; ++c)
    push(model.feature_names.empty() ? data.feature_names[c] : model.feature_names[c],
         model.beta[c], c);
  for (int a = 0; a < n_alpha; ++a)
    push("dataset:" + model.dataset_levels[a + 1], model.alpha[a], kNumFeatures + a);
  for (int g = 0; g < n_gamma; ++g)
    push("scenario:" + model.scenario_levels[g + 1], model.gamma[g],
         kNumFeatures + n_alpha + g);
  return rows;
}

void save_coefficient_csv(const std::vector<CoefficientRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write coefficient csv: " + path);
  out << "feature,coef,se,z,p_value,odds_ratio\n";
  char buf[256];
  for (const auto& r : rows) {
    std::string se = r.se ? [&] { std::snprintf(buf, sizeof(buf), "%.17g", *r.se); return std::string(buf); }() : "";
    std::string z = r.z ? [&] { std::snprintf(buf, sizeof(buf), "%.17g", *r.z); return std::string(buf); }() : "";
    std::string p = r.p ? [&] { std::snprintf(buf, sizeof(buf), "%.17g", *r.p); return std::string(buf); }() : "";
    std::snprintf(buf, sizeof(buf), "%.17g", r.coef);
    out << r.name << "," << buf << "," << se << "," << z << "," << p << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", r.odds_ratio);
    out << buf << "\n";
  }
}

// --- LODO ----------------------------------------------------------------------------

LodoResult lodo(const DesignMatrix& data, ModelSpec spec, const FitOptions& opts) {
  if (data.dataset_levels.size() < 2)
    throw ValidationError("LODO requires at least two datasets");

  LodoResult result;
  OrdinalModel pooled = fit(data, spec, opts);
  result.pooled_beta = pooled.beta;

  for (const auto& ds : data.dataset_levels) {
    DesignMatrix hold = drop_dataset(data, ds);
    if (hold.n == 0 || hold.outcome_classes() < 2) {
      std::fprintf(stderr, "warning: LODO hold '%s' leaves degenerate data; skipped\n",
                   ds.c_str());
      result.skipped_holds.push_back(ds);
      continue;
    }
    OrdinalModel m = fit(hold, spec, opts);
    result.held_datasets.push_back(ds);
    result.beta_per_hold.push_back(m.beta);
  }
  if (result.beta_per_hold.empty())
    throw ValidationError("every LODO hold was degenerate");

  const int k = static_cast<int>(result.beta_per_hold.size());
  result.mean_beta.assign(kNumFeatures, 0.0);
  result.stddev_beta.assign(kNumFeatures, 0.0);
  for (const auto& b : result.beta_per_hold)
    for (int c = 0; c < kNumFeatures; ++c) result.mean_beta[c] += b[c] / k;
  for (const auto& b : result.beta_per_hold)
    for (int c = 0; c < kNumFeatures; ++c) {
      double d = b[c] - result.mean_beta[c];
      result.stddev_beta[c] += d * d / k;
    }
  for (int c = 0; c < kNumFeatures; ++c)
    result.stddev_beta[c] = std::sqrt(result.stddev_beta[c]);
  return result;
}

void save_lodo_csv(const LodoResult& result, const std::vector<std::string>& feature_names,
                   const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write lodo csv: " + path);
  out << "feature,pooled_beta,mean_beta,stddev_beta,n_holds\n";
  char buf[64];
  for (int c = 0; c < kNumFeatures; ++c) {
    out << feature_names[c] << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", result.pooled_beta[c]);
    out << buf << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", result.mean_beta[c]);
    out << buf << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", result.stddev_beta[c]);
    out << buf << "," << result.beta_per_hold.size() << "\n";
  }
}

// --- persistence -----------------------------------------------------------------------

void save_model(const OrdinalModel& model, const std::string& path) {
  json j;
  j["spec"] = to_string(model.spec);
  j["feature_names"] = model.feature_names;
  j["beta"] = model.beta;
  j["dataset_levels"] = model.dataset_levels;
  j["alpha"] = model.alpha;
  j["scenario_levels"] = model.scenario_levels;
  j["gamma"] = model.gamma;
  j["tau0"] = model.tau0;
  j["tau1"] = model.tau1;
  j["lambda_reg"] = model.lambda_reg;
  j["seed"] = model.seed;
  j["converged"] = model.converged;
  json means = json::object(), stds = json::object();
  for (int k = 0; k < kNumNumericFeatures; ++k) {
    const char* name = to_string(numeric_feature_names()[k]);
    means[name] = model.numeric_stats.mean[k];
    stds[name] = model.numeric_stats.stddev[k];
  }
  j["numeric_means"] = std::move(means);
  j["numeric_stds"] = std::move(stds);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write model file: " + path);
  out << j.dump(2) << "\n";
}

OrdinalModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open model file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("malformed model file: " + std::string(e.what()));
  }
  OrdinalModel m;
  m.spec = model_spec_from_string(j.at("spec").get<std::string>());
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  m.beta = j.at("beta").get<std::vector<double>>();
  m.dataset_levels = j.at("dataset_levels").get<std::vector<std::string>>();
  m.alpha = j.at("alpha").get<std::vector<double>>();
  m.scenario_levels = j.at("scenario_levels").get<std::vector<std::string>>();
  m.gamma = j.at("gamma").get<std::vector<double>>();
  m.tau0 = j.at("tau0").get<double>();
  m.tau1 = j.at("tau1").get<double>();
  m.lambda_reg = j.at("lambda_reg").get<double>();
  m.seed = j.at("seed").get<uint64_t>();
  m.converged = j.at("converged").get<bool>();
  if (m.tau0 >= m.tau1)
    throw ValidationError("model file violates tau0 < tau1");
  if (static_cast<int>(m.beta.size()) != kNumFeatures)
    throw ValidationError("model beta has wrong dimension");
  if (j.contains("numeric_means")) {
    for (int k = 0; k < kNumNumericFeatures; ++k) {
      const char* name = to_string(numeric_feature_names()[k]);
      m.numeric_stats.mean[k] = j.at("numeric_means").at(name).get<double>();
      m.numeric_stats.stddev[k] = j.at("numeric_stds").at(name).get<double>();
    }
  }
  return m;
}

}  // namespace qrisk

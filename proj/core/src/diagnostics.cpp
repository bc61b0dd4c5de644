#include "qrisk/diagnostics.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "qrisk/errors.hpp"

namespace qrisk {

namespace {

double median_sorted(const std::vector<double>& sorted) {
  const size_t n = sorted.size();
  if (n % 2 == 1) return sorted[n / 2];
  return 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : ""; }

// Equal-mass bin boundaries over a sorted sequence, shifted forward so a run
// of tied values never straddles a boundary. Returns strictly increasing
// indices into [0, n); bins are the ranges between consecutive boundaries.
// A constant sequence collapses to a single bin.
template <typename ValueAt>
std::vector<size_t> tie_respecting_boundaries(size_t n, int bins, ValueAt value_at) {
  std::vector<size_t> bounds;
  for (int k = 1; k < bins; ++k) {
    size_t idx = static_cast<size_t>(k) * n / bins;
    while (idx > 0 && idx < n && value_at(idx) == value_at(idx - 1)) ++idx;
    if (idx >= n) break;
    if (bounds.empty() || idx > bounds.back()) bounds.push_back(idx);
  }
  return bounds;
}

}  // namespace

// --- ECDF separation ----------------------------------------------------------------

EcdfSeparation ecdf_separation(const std::vector<double>& predictions,
                               const std::vector<int>& presence) {
  if (predictions.size() != presence.size())
    throw ValidationError("ecdf_separation: size mismatch");
  std::vector<double> present, absent;
  for (size_t i = 0; i < predictions.size(); ++i)
    (presence[i] ? present : absent).push_back(predictions[i]);
  if (present.empty() || absent.empty())
    throw ValidationError("ecdf_separation: a group is empty");

  std::sort(present.begin(), present.end());
  std::sort(absent.begin(), absent.end());

  // sup of |F_present - F_absent| over the merged support
  double ks = 0.0;
  size_t ip = 0, ia = 0;
  while (ip < present.size() || ia < absent.size()) {
    double v;
    if (ip < present.size() && ia < absent.size())
      v = std::min(present[ip], absent[ia]);
    else
      v = ip < present.size() ? present[ip] : absent[ia];
    while (ip < present.size() && present[ip] <= v) ++ip;
    while (ia < absent.size() && absent[ia] <= v) ++ia;
    double fp = static_cast<double>(ip) / present.size();
    double fa = static_cast<double>(ia) / absent.size();
    ks = std::max(ks, std::abs(fp - fa));
  }

  EcdfSeparation sep;
  sep.ks = ks;
  sep.delta_median = median_sorted(present) - median_sorted(absent);
  sep.n_present = static_cast<int>(present.size());
  sep.n_absent = static_cast<int>(absent.size());
  sep.tied = sep.delta_median == 0.0;
  sep.risk_up = sep.delta_median > 0.0;
  return sep;
}

// --- rank correlations -----------------------------------------------------------------

namespace {

// average ranks (1-based) with ties sharing their mean rank
std::vector<double> average_ranks(const std::vector<double>& values) {
  const size_t n = values.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const size_t n = a.size();
  double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

// tau-b with tie corrections, O(n^2) pair counting
std::optional<double> kendall_tau_b(const std::vector<double>& x, const std::vector<int>& y) {
  const size_t n = x.size();
  long long concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      double dx = x[i] - x[j];
      int dy = y[i] - y[j];
      if (dx == 0.0 && dy == 0) continue;
      if (dx == 0.0) {
        ++ties_x;
      } else if (dy == 0) {
        ++ties_y;
      } else if ((dx > 0.0) == (dy > 0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  double n0 = 0.5 * n * (n - 1);
  double nx = n0 - ties_x -
              (n0 - concordant - discordant - ties_x - ties_y);  // pairs not tied in x
  // recompute directly: pairs tied in x include joint ties
  long long joint = static_cast<long long>(n0) - concordant - discordant - ties_x - ties_y;
  double tied_x_total = ties_x + joint;
  double tied_y_total = ties_y + joint;
  double denom = std::sqrt((n0 - tied_x_total) * (n0 - tied_y_total));
  (void)nx;
  if (denom == 0.0) return std::nullopt;
  return (static_cast<double>(concordant) - static_cast<double>(discordant)) / denom;
}

std::optional<double> spearman_p(double rho, size_t n) {
  if (n < 3) return std::nullopt;
  double r2 = 1.0 - rho * rho;
  if (r2 <= 0.0) return 0.0;  // |rho| = 1
  double t = rho * std::sqrt((n - 2) / r2);
  boost::math::students_t dist(static_cast<double>(n - 2));
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

}  // namespace

RankCorrelation rank_correlation(const std::vector<double>& values,
                                 const std::vector<int>& outcome) {
  if (values.size() != outcome.size())
    throw ValidationError("rank_correlation: size mismatch");
  if (values.size() < 3) throw ValidationError("rank_correlation requires n >= 3");
  RankCorrelation rc;
  std::vector<double> outcome_d(outcome.begin(), outcome.end());
  auto rx = average_ranks(values);
  auto ry = average_ranks(outcome_d);
  auto rho = pearson(rx, ry);
  if (!rho) return rc;  // constant input: undefined, flagged by unset fields
  rc.spearman_rho = rho;
  rc.kendall_tau = kendall_tau_b(values, outcome);
  rc.p_value = spearman_p(*rho, values.size());
  return rc;
}

std::vector<double> benjamini_hochberg(const std::vector<double>& pvalues) {
  const size_t m = pvalues.size();
  std::vector<size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return pvalues[a] < pvalues[b]; });
  std::vector<double> adjusted(m);
  double running = 1.0;
  for (size_t i = m; i-- > 0;) {
    double adj = pvalues[order[i]] * m / (i + 1);
    running = std::min(running, adj);
    adjusted[order[i]] = std::min(1.0, running);
  }
  return adjusted;
}

std::vector<RankCorrelation> rank_correlations(
    const std::vector<std::vector<double>>& feature_values, const std::vector<int>& outcome,
    PAdjust adjust) {
  std::vector<RankCorrelation> out;
  out.reserve(feature_values.size());
  for (const auto& vals : feature_values) out.push_back(rank_correlation(vals, outcome));

  std::vector<size_t> defined;
  std::vector<double> ps;
  for (size_t i = 0; i < out.size(); ++i)
    if (out[i].p_value) {
      defined.push_back(i);
      ps.push_back(*out[i].p_value);
    }
  if (ps.empty()) return out;
  switch (adjust) {
    case PAdjust::BenjaminiHochberg: {
      auto adj = benjamini_hochberg(ps);
      for (size_t k = 0; k < defined.size(); ++k) out[defined[k]].p_adjusted = adj[k];
      break;
    }
    case PAdjust::Bonferroni:
      for (size_t k = 0; k < defined.size(); ++k)
        out[defined[k]].p_adjusted = std::min(1.0, ps[k] * ps.size());
      break;
    case PAdjust::None:
      for (size_t k = 0; k < defined.size(); ++k) out[defined[k]].p_adjusted = ps[k];
      break;
  }
  return out;
}

// --- risk vs length -------------------------------------------------------------------

std::pair<double, double> wilson_interval(int successes, int n) {
  if (n <= 0) throw ValidationError("wilson_interval requires n > 0");
  const double z = 1.959963984540054;  // 97.5th normal quantile
  double phat = static_cast<double>(successes) / n;
  double z2 = z * z;
  double denom = 1.0 + z2 / n;
  double center = (phat + z2 / (2.0 * n)) / denom;
  double half = z * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

std::vector<LengthBinRow> risk_vs_length(const std::vector<LengthItem>& items, int bins,
                                         int min_bin) {
  if (items.empty()) return {};
  if (bins < 1) throw ValidationError("risk_vs_length requires bins >= 1");

  std::vector<size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return items[a].token_length < items[b].token_length;
  });

  const size_t n = items.size();
  auto bounds = tie_respecting_boundaries(
      n, bins, [&](size_t i) { return items[order[i]].token_length; });
  std::vector<LengthBinRow> out;
  for (size_t b = 0; b <= bounds.size(); ++b) {
    size_t lo = b == 0 ? 0 : bounds[b - 1];
    size_t hi = b == bounds.size() ? n : bounds[b];
    if (lo >= hi) continue;
    LengthBinRow row;
    double length_sum = 0.0;
    int risky_p = 0, risky_a = 0;
    for (size_t k = lo; k < hi; ++k) {
      const LengthItem& it = items[order[k]];
      length_sum += it.token_length;
      if (it.presence) {
        ++row.n_present;
        risky_p += it.risky;
      } else {
        ++row.n_absent;
        risky_a += it.risky;
      }
    }
    row.center = length_sum / static_cast<double>(hi - lo);
    if (row.n_present >= min_bin) {
      row.rate_present = static_cast<double>(risky_p) / row.n_present;
      auto [l, h] = wilson_interval(risky_p, row.n_present);
      row.lo_present = l;
      row.hi_present = h;
    }
    if (row.n_absent >= min_bin) {
      row.rate_absent = static_cast<double>(risky_a) / row.n_absent;
      auto [l, h] = wilson_interval(risky_a, row.n_absent);
      row.lo_absent = l;
      row.hi_absent = h;
    }
    out.push_back(row);
  }
  return out;
}

// --- calibration ----------------------------------------------------------------------

ReliabilityResult reliability(const std::vector<double>& predictions,
                              const std::vector<int>& outcomes, int bins) {
  if (predictions.size() != outcomes.size())
    throw ValidationError("reliability: size mismatch");
  if (static_cast<int>(predictions.size()) < bins)
    throw ValidationError("reliability requires n >= bins");

  const size_t n = predictions.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return predictions[a] < predictions[b]; });

  auto bounds = tie_respecting_boundaries(
      n, bins, [&](size_t i) { return predictions[order[i]]; });
  ReliabilityResult res;
  double ece = 0.0;
  for (size_t b = 0; b <= bounds.size(); ++b) {
    size_t lo = b == 0 ? 0 : bounds[b - 1];
    size_t hi = b == bounds.size() ? n : bounds[b];
    if (lo >= hi) continue;
    ReliabilityBin bin;
    double pred_sum = 0.0;
    int pos = 0;
    for (size_t k = lo; k < hi; ++k) {
      pred_sum += predictions[order[k]];
      pos += outcomes[order[k]] ? 1 : 0;
    }
    bin.n = static_cast<int>(hi - lo);
    bin.mean_pred = pred_sum / bin.n;
    bin.observed = static_cast<double>(pos) / bin.n;
    ece += (static_cast<double>(bin.n) / n) * std::abs(bin.observed - bin.mean_pred);
    res.curve.push_back(bin);
  }
  res.ece = ece;
  return res;
}

// --- propensity --------------------------------------------------------------------------

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

PropensityResult propensity_fit(int feature_col, const DesignMatrix& design,
                                const PropensityOptions& opts) {
  design.validate();
  if (feature_col < 0 || feature_col >= kNumBinaryFeatures)
    throw ValidationError("propensity treatment must be a binary feature column");

  const int n = design.n;
  std::vector<int> treatment(n);
  int n_present = 0;
  for (int r = 0; r < n; ++r) {
    double v = design.feat(r, feature_col);
    if (v != 0.0 && v != 1.0)
      throw ValidationError("treatment column is not binary");
    treatment[r] = static_cast<int>(v);
    n_present += treatment[r];
  }
  if (n_present == 0 || n_present == n)
    throw ValidationError("propensity_fit: treatment has a single group");

  // covariates: intercept + all other feature columns + level indicators
  const int n_ds = std::max<int>(0, static_cast<int>(design.dataset_levels.size()) - 1);
  const int n_sc = std::max<int>(0, static_cast<int>(design.scenario_levels.size()) - 1);
  const int d = 1 + (kNumFeatures - 1) + n_ds + n_sc;

  Eigen::MatrixXd X(n, d);
  Eigen::VectorXd T(n);
  for (int r = 0; r < n; ++r) {
    int c_out = 0;
    X(r, c_out++) = 1.0;
    for (int c = 0; c < kNumFeatures; ++c) {
      if (c == feature_col) continue;
      X(r, c_out++) = design.feat(r, c);
    }
    for (int k = 1; k <= n_ds; ++k) X(r, c_out++) = design.dataset_index[r] == k ? 1.0 : 0.0;
    for (int k = 1; k <= n_sc; ++k)
      X(r, c_out++) = design.scenario_index[r] == k ? 1.0 : 0.0;
    T(r) = treatment[r];
  }

  // Newton/IRLS with a tiny ridge; near-deterministic treatments push the
  // linear predictor to the clip boundary and stop via max_iters
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(d);
  const double ridge = 1e-8;
  for (int it = 0; it < opts.max_iters; ++it) {
    Eigen::VectorXd eta = X * phi;
    Eigen::VectorXd p(n), w(n);
    for (int r = 0; r < n; ++r) {
      p(r) = sigmoid(eta(r));
      w(r) = std::max(p(r) * (1.0 - p(r)), 1e-10);
    }
    Eigen::VectorXd grad = X.transpose() * (p - T) + ridge * phi;
    Eigen::MatrixXd H = X.transpose() * w.asDiagonal() * X;
    H.diagonal().array() += ridge;
    Eigen::VectorXd step = H.ldlt().solve(grad);
    phi -= step;
    if (step.lpNorm<Eigen::Infinity>() < 1e-10) break;
  }

  PropensityResult res;
  res.n_present = n_present;
  res.n_absent = n - n_present;
  res.scores.resize(n);
  Eigen::VectorXd eta = X * phi;
  int in_overlap = 0;
  for (int r = 0; r < n; ++r) {
    double s = sigmoid(eta(r));
    s = std::min(1.0 - opts.clip, std::max(opts.clip, s));
    res.scores[r] = s;
    if (s >= opts.overlap_alpha && s <= 1.0 - opts.overlap_alpha) ++in_overlap;
  }
  res.overlap_share = static_cast<double>(in_overlap) / n;
  return res;
}

double ate_ipw(const std::vector<double>& outcome, const std::vector<int>& treatment,
               const std::vector<double>& scores) {
  const size_t n = outcome.size();
  if (treatment.size() != n || scores.size() != n)
    throw ValidationError("ate_ipw: size mismatch");
  double num_t = 0.0, den_t = 0.0, num_c = 0.0, den_c = 0.0;
  double max_w_t = 0.0, max_w_c = 0.0;
  for (size_t i = 0; i < n; ++i) {
    if (treatment[i]) {
      double w = 1.0 / scores[i];
      num_t += w * outcome[i];
      den_t += w;
      max_w_t = std::max(max_w_t, w);
    } else {
      double w = 1.0 / (1.0 - scores[i]);
      num_c += w * outcome[i];
      den_c += w;
      max_w_c = std::max(max_w_c, w);
    }
  }
  if (den_t == 0.0 || den_c == 0.0)
    throw ValidationError("ate_ipw: a treatment group is empty");
  if (max_w_t > 0.99 * den_t || max_w_c > 0.99 * den_c)
    std::fprintf(stderr, "warning: IPW weights degenerate (one item dominates a group)\n");
  return num_t / den_t - num_c / den_c;
}

double ate_stratified(const std::vector<double>& outcome, const std::vector<int>& treatment,
                      const std::vector<double>& scores, int strata) {
  const size_t n = outcome.size();
  if (treatment.size() != n || scores.size() != n)
    throw ValidationError("ate_stratified: size mismatch");
  if (strata < 1) throw ValidationError("ate_stratified requires strata >= 1");

  // score-quantile strata; tied scores never straddle a boundary, so a
  // constant score yields one stratum
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  auto bounds =
      tie_respecting_boundaries(n, strata, [&](size_t i) { return scores[order[i]]; });

  const size_t n_strata = bounds.size() + 1;
  std::vector<double> sum1(n_strata, 0.0), sum0(n_strata, 0.0);
  std::vector<int> cnt1(n_strata, 0), cnt0(n_strata, 0);
  for (size_t pos = 0; pos < n; ++pos) {
    size_t b = static_cast<size_t>(std::upper_bound(bounds.begin(), bounds.end(), pos) -
                                   bounds.begin());
    size_t i = order[pos];
    if (treatment[i]) {
      sum1[b] += outcome[i];
      ++cnt1[b];
    } else {
      sum0[b] += outcome[i];
      ++cnt0[b];
    }
  }

  double weight_total = 0.0, contrast = 0.0;
  for (size_t b = 0; b < n_strata; ++b) {
    if (cnt1[b] == 0 || cnt0[b] == 0) continue;  // dropped; weights renormalize
    double nb = cnt1[b] + cnt0[b];
    contrast += nb * (sum1[b] / cnt1[b] - sum0[b] / cnt0[b]);
    weight_total += nb;
  }
  if (weight_total == 0.0)
    throw ValidationError("ate_stratified: no stratum contains both groups");
  return contrast / weight_total;
}

PropensityResult propensity_with_uplifts(int feature_col, const DesignMatrix& design,
                                         const std::vector<double>& outcome,
                                         const PropensityOptions& opts) {
  if (static_cast<int>(outcome.size()) != design.n)
    throw ValidationError("outcome length must match the design");
  PropensityResult res = propensity_fit(feature_col, design, opts);
  res.feature = design.feature_names[feature_col];
  if (res.overlap_share >= opts.report_threshold) {
    std::vector<int> treatment(design.n);
    for (int r = 0; r < design.n; ++r)
      treatment[r] = design.feat(r, feature_col) != 0.0 ? 1 : 0;
    res.ate_ipw = ate_ipw(outcome, treatment, res.scores);
    res.ate_strat = ate_stratified(outcome, treatment, res.scores, opts.strata);
  }
  return res;
}

// --- CSV writers ------------------------------------------------------------------------

void write_separations_csv(const std::vector<EcdfSeparation>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write separations csv: " + path);
  out << "feature,ks,delta_median,n_present,n_absent,direction\n";
  for (const auto& r : rows)
    out << r.feature << "," << fmt(r.ks) << "," << fmt(r.delta_median) << "," << r.n_present
        << "," << r.n_absent << "," << (r.risk_up ? "risk_up" : "risk_down") << "\n";
}

void write_correlations_csv(const std::vector<std::string>& feature_names,
                            const std::vector<RankCorrelation>& rows,
                            const std::string& path) {
  if (feature_names.size() != rows.size())
    throw ValidationError("correlations csv: name/row count mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write correlations csv: " + path);
  out << "feature,spearman_rho,kendall_tau,p_adjusted\n";
  for (size_t i = 0; i < rows.size(); ++i)
    out << feature_names[i] << "," << fmt_opt(rows[i].spearman_rho) << ","
        << fmt_opt(rows[i].kendall_tau) << "," << fmt_opt(rows[i].p_adjusted) << "\n";
}

void write_calibration_csv(const std::vector<std::pair<std::string, ReliabilityResult>>& rows,
                           const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write calibration csv: " + path);
  out << "stratum,bin,mean_pred,observed,n,ece\n";
  for (const auto& [name, rel] : rows)
    for (size_t b = 0; b < rel.curve.size(); ++b)
      out << name << "," << b << "," << fmt(rel.curve[b].mean_pred) << ","
          << fmt(rel.curve[b].observed) << "," << rel.curve[b].n << "," << fmt(rel.ece)
          << "\n";
}

void write_length_curves_csv(
    const std::vector<std::pair<std::string, std::vector<LengthBinRow>>>& rows,
    const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write length curves csv: " + path);
  out << "feature,bin,center,n_present,rate_present,lo_present,hi_present,"
         "n_absent,rate_absent,lo_absent,hi_absent\n";
  for (const auto& [name, bins] : rows)
    for (size_t b = 0; b < bins.size(); ++b) {
      const auto& r = bins[b];
      out << name << "," << b << "," << fmt(r.center) << "," << r.n_present << ","
          << fmt_opt(r.rate_present) << "," << fmt_opt(r.lo_present) << ","
          << fmt_opt(r.hi_present) << "," << r.n_absent << "," << fmt_opt(r.rate_absent)
          << "," << fmt_opt(r.lo_absent) << "," << fmt_opt(r.hi_absent) << "\n";
    }
}

void write_propensity_csv(const std::vector<PropensityResult>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write propensity csv: " + path);
  out << "feature,n_present,n_absent,overlap,ate_ipw,ate_strat\n";
  for (const auto& r : rows)
    out << r.feature << "," << r.n_present << "," << r.n_absent << ","
        << fmt(r.overlap_share) << "," << fmt_opt(r.ate_ipw) << "," << fmt_opt(r.ate_strat)
        << "\n";
}

}  // namespace qrisk

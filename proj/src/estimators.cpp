#include "tpwate/estimators.hpp"

#include <cmath>
#include <stdexcept>

namespace tpwate {

namespace {

const double kNan = std::numeric_limits<double>::quiet_NaN();

std::vector<char> phase2_mask(const ObservationTable& t) {
  std::vector<char> m(static_cast<std::size_t>(t.n()));
  for (Eigen::Index i = 0; i < t.n(); ++i) m[static_cast<std::size_t>(i)] = t.delta[i] == 1;
  return m;
}

void require_enrichable(const StratumIndex& strata) {
  for (int k = 0; k < strata.K(); ++k)
    if (strata.counts[k] > 0 && strata.phase2_counts[k] == 0)
      throw std::runtime_error("cannot enrich: empty phase-2 stratum " + std::to_string(k));
}

}  // namespace

Eigen::MatrixXd build_design(const ObservationTable& t,
                             const std::vector<std::string>& columns) {
  Eigen::MatrixXd x(t.n(), static_cast<Eigen::Index>(columns.size()) + 1);
  x.col(0).setOnes();
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const std::string& name = columns[j];
    bool found = false;
    for (std::size_t c = 0; c < t.v_names.size(); ++c)
      if (t.v_names[c] == name) {
        x.col(static_cast<Eigen::Index>(j) + 1) = t.v.col(static_cast<Eigen::Index>(c));
        found = true;
        break;
      }
    if (!found)
      for (std::size_t c = 0; c < t.w_names.size(); ++c)
        if (t.w_names[c] == name) {
          x.col(static_cast<Eigen::Index>(j) + 1) = t.w.col(static_cast<Eigen::Index>(c));
          found = true;
          break;
        }
    if (!found) throw std::invalid_argument("unknown design column '" + name + "'");
  }
  return x;
}

NuisanceBundle fit_ps_only(const ObservationTable& t,
                           const std::vector<std::string>& ps_columns) {
  NuisanceBundle b;
  b.ps_columns = ps_columns;
  Eigen::MatrixXd x = build_design(t, ps_columns);
  Eigen::VectorXd resp = t.a.cast<double>();
  Eigen::VectorXd wts = (t.delta.cast<double>().array() / t.q.array()).matrix();
  b.ps = fit_weighted_logistic(x, resp, wts, phase2_mask(t));
  b.ps.design_columns = ps_columns;
  return b;
}

NuisanceBundle fit_nuisances(const ObservationTable& t,
                             const std::vector<std::string>& ps_columns,
                             const std::vector<std::string>& outcome_columns) {
  NuisanceBundle b = fit_ps_only(t, ps_columns);
  b.outcome_columns = outcome_columns;
  Eigen::MatrixXd xo = build_design(t, outcome_columns);
  Eigen::VectorXd wts = (t.delta.cast<double>().array() / t.q.array()).matrix();
  std::vector<char> m1(static_cast<std::size_t>(t.n())), m0(m1.size());
  for (Eigen::Index i = 0; i < t.n(); ++i) {
    bool ph2 = t.delta[i] == 1;
    m1[static_cast<std::size_t>(i)] = ph2 && t.a[i] == 1;
    m0[static_cast<std::size_t>(i)] = ph2 && t.a[i] == 0;
  }
  b.out1 = fit_weighted_logistic(xo, t.y, wts, m1);
  b.out0 = fit_weighted_logistic(xo, t.y, wts, m0);
  b.out1.design_columns = outcome_columns;
  b.out0.design_columns = outcome_columns;
  return b;
}

RowQuantities compute_rows(const ObservationTable& t, const NuisanceBundle& bundle,
                           Estimand estimand, bool with_outcomes) {
  const Eigen::Index n = t.n();
  RowQuantities r;
  r.e.setConstant(n, kNan);
  r.mu1.setConstant(n, kNan);
  r.mu0.setConstant(n, kNan);
  r.wgt.setConstant(n, kNan);
  r.wdot.setConstant(n, kNan);
  r.tau.setConstant(n, kNan);

  Eigen::MatrixXd xe = build_design(t, bundle.ps_columns);
  Eigen::MatrixXd xo;
  if (with_outcomes) xo = build_design(t, bundle.outcome_columns);

  for (Eigen::Index i = 0; i < n; ++i) {
    if (t.delta[i] != 1) continue;
    double e = expit(xe.row(i).dot(bundle.ps.coefficients));
    if (e < kPsClampLo) {
      e = kPsClampLo;
      ++r.clamp_count;
    } else if (e > 1.0 - kPsClampLo) {
      e = 1.0 - kPsClampLo;
      ++r.clamp_count;
    }
    r.e[i] = e;
    WeightValue wv = weight_value(estimand, e);
    r.wgt[i] = wv.w;
    r.wdot[i] = wv.wdot;
    if (with_outcomes) {
      r.mu1[i] = expit(xo.row(i).dot(bundle.out1.coefficients));
      r.mu0[i] = expit(xo.row(i).dot(bundle.out0.coefficients));
      r.tau[i] = r.mu1[i] - r.mu0[i];
    }
  }
  return r;
}

Eigen::VectorXd stratum_conditional_means(const Eigen::VectorXd& values,
                                          const StratumIndex& strata,
                                          const ObservationTable& t) {
  require_enrichable(strata);
  const int K = strata.K();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(K);
  Eigen::VectorXd cnt = Eigen::VectorXd::Zero(K);
  for (Eigen::Index i = 0; i < t.n(); ++i) {
    if (t.delta[i] != 1) continue;
    int k = strata.labels[static_cast<std::size_t>(i)];
    sum[k] += values[i];
    cnt[k] += 1.0;
  }
  Eigen::VectorXd g(K);
  for (int k = 0; k < K; ++k) g[k] = cnt[k] > 0.0 ? sum[k] / cnt[k] : kNan;
  return g;
}

namespace {

// Per-arm inverse-weighting integrands on phase-2 rows: numerator
// 1{A=a} w Y / e_a and denominator 1{A=a} w / e_a.
struct IwParts {
  Eigen::VectorXd num1, den1, num0, den0;
};

IwParts iw_parts(const ObservationTable& t, const RowQuantities& r) {
  const Eigen::Index n = t.n();
  IwParts p;
  p.num1.setZero(n);
  p.den1.setZero(n);
  p.num0.setZero(n);
  p.den0.setZero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (t.delta[i] != 1) continue;
    if (t.a[i] == 1) {
      p.den1[i] = r.wgt[i] / r.e[i];
      p.num1[i] = p.den1[i] * t.y[i];
    } else {
      p.den0[i] = r.wgt[i] / (1.0 - r.e[i]);
      p.num0[i] = p.den0[i] * t.y[i];
    }
  }
  return p;
}

// Doubly robust integrands: numerator residual+model term and the
// denominator term w + wdot (A - e).
struct DrParts {
  Eigen::VectorXd num;  // w{A/e (Y-mu1) - (1-A)/(1-e)(Y-mu0)} + dden * tau_i
  Eigen::VectorXd den;  // w + wdot (A - e)
};

DrParts dr_parts(const ObservationTable& t, const RowQuantities& r) {
  const Eigen::Index n = t.n();
  DrParts p;
  p.num.setZero(n);
  p.den.setZero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (t.delta[i] != 1) continue;
    double resid = t.a[i] == 1 ? r.wgt[i] / r.e[i] * (t.y[i] - r.mu1[i])
                               : -r.wgt[i] / (1.0 - r.e[i]) * (t.y[i] - r.mu0[i]);
    double dden = r.wgt[i] + r.wdot[i] * (t.a[i] - r.e[i]);
    p.den[i] = dden;
    p.num[i] = resid + dden * r.tau[i];
  }
  return p;
}

double ratio_or_throw(double num, double den, const char* what) {
  if (den == 0.0) throw std::runtime_error(std::string("zero denominator in ") + what);
  return num / den;
}

// Sum of delta/q-weighted values plus, when strata are given, the
// (1 - delta/q)-weighted stratum means.
double enriched_sum(const ObservationTable& t, const Eigen::VectorXd& values,
                    const StratumIndex* strata, const Eigen::VectorXd* g) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < t.n(); ++i) {
    double si = t.delta[i] / t.q[i];
    if (t.delta[i] == 1) s += si * values[i];
    if (strata) s += (1.0 - si) * (*g)[strata->labels[static_cast<std::size_t>(i)]];
  }
  return s;
}

}  // namespace

EstimateResult estimate_siw(const ObservationTable& t, const NuisanceBundle& bundle,
                            Estimand estimand) {
  EstimateResult res;
  res.estimand = estimand;
  res.estimator = "siw";
  res.rows = compute_rows(t, bundle, estimand, false);
  IwParts p = iw_parts(t, res.rows);
  double n1 = enriched_sum(t, p.num1, nullptr, nullptr);
  double d1 = enriched_sum(t, p.den1, nullptr, nullptr);
  double n0 = enriched_sum(t, p.num0, nullptr, nullptr);
  double d0 = enriched_sum(t, p.den0, nullptr, nullptr);
  res.mu1_hat = ratio_or_throw(n1, d1, "siw arm 1");
  res.mu0_hat = ratio_or_throw(n0, d0, "siw arm 0");
  res.tau_hat = res.mu1_hat - res.mu0_hat;
  return res;
}

EstimateResult estimate_eiw(const ObservationTable& t, const NuisanceBundle& bundle,
                            Estimand estimand, const StratumIndex& strata) {
  EstimateResult res;
  res.estimand = estimand;
  res.estimator = "eiw";
  res.rows = compute_rows(t, bundle, estimand, false);
  IwParts p = iw_parts(t, res.rows);
  Eigen::VectorXd gn1 = stratum_conditional_means(p.num1, strata, t);
  Eigen::VectorXd gd1 = stratum_conditional_means(p.den1, strata, t);
  Eigen::VectorXd gn0 = stratum_conditional_means(p.num0, strata, t);
  Eigen::VectorXd gd0 = stratum_conditional_means(p.den0, strata, t);
  double n1 = enriched_sum(t, p.num1, &strata, &gn1);
  double d1 = enriched_sum(t, p.den1, &strata, &gd1);
  double n0 = enriched_sum(t, p.num0, &strata, &gn0);
  double d0 = enriched_sum(t, p.den0, &strata, &gd0);
  res.mu1_hat = ratio_or_throw(n1, d1, "eiw arm 1");
  res.mu0_hat = ratio_or_throw(n0, d0, "eiw arm 0");
  res.tau_hat = res.mu1_hat - res.mu0_hat;
  res.stratum_means.resize(strata.K(), 4);
  res.stratum_means << gn1, gd1, gn0, gd0;
  res.stratum_mean_names = {"num1", "den1", "num0", "den0"};
  return res;
}

EstimateResult estimate_sdr(const ObservationTable& t, const NuisanceBundle& bundle,
                            Estimand estimand) {
  EstimateResult res;
  res.estimand = estimand;
  res.estimator = "sdr";
  res.rows = compute_rows(t, bundle, estimand, true);
  DrParts p = dr_parts(t, res.rows);
  double num = enriched_sum(t, p.num, nullptr, nullptr);
  double den = enriched_sum(t, p.den, nullptr, nullptr);
  res.tau_hat = ratio_or_throw(num, den, "sdr");
  return res;
}

EstimateResult estimate_edr(const ObservationTable& t, const NuisanceBundle& bundle,
                            Estimand estimand, const StratumIndex& strata) {
  EstimateResult res;
  res.estimand = estimand;
  res.estimator = "edr";
  res.rows = compute_rows(t, bundle, estimand, true);
  DrParts p = dr_parts(t, res.rows);
  Eigen::VectorXd gn = stratum_conditional_means(p.num, strata, t);
  Eigen::VectorXd gd = stratum_conditional_means(p.den, strata, t);
  double num = enriched_sum(t, p.num, &strata, &gn);
  double den = enriched_sum(t, p.den, &strata, &gd);
  res.tau_hat = ratio_or_throw(num, den, "edr");
  res.stratum_means.resize(strata.K(), 2);
  res.stratum_means << gn, gd;
  res.stratum_mean_names = {"num", "den"};
  return res;
}

EstimateResult estimate(const std::string& estimator, const ObservationTable& t,
                        const NuisanceBundle& bundle, Estimand estimand,
                        const StratumIndex* strata) {
  if (estimator == "siw") return estimate_siw(t, bundle, estimand);
  if (estimator == "sdr") return estimate_sdr(t, bundle, estimand);
  if (estimator == "eiw" || estimator == "edr") {
    if (!strata)
      throw std::invalid_argument("estimator '" + estimator + "' needs a stratum index");
    return estimator == "eiw" ? estimate_eiw(t, bundle, estimand, *strata)
                              : estimate_edr(t, bundle, estimand, *strata);
  }
  throw std::invalid_argument("unknown estimator '" + estimator + "'");
}

}  // namespace tpwate

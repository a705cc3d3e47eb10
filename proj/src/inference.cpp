#include "tpwate/inference.hpp"

#include <cmath>
#include <stdexcept>

namespace tpwate {

// Wichura's AS241 (PPND16) rational approximations.
double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("normal_quantile: p must lie in (0,1)");
  static const double a[8] = {3.3871328727963666080e0,  1.3314166789178437745e+2,
                              1.9715909503065514427e+3, 1.3731693765509461125e+4,
                              4.5921953931549871457e+4, 6.7265770927008700853e+4,
                              3.3430575583588128105e+4, 2.5090809287301226727e+3};
  static const double b[8] = {1.0,
                              4.2313330701600911252e+1,
                              6.8718700749205790830e+2,
                              5.3941960214247511077e+3,
                              2.1213794301586595867e+4,
                              3.9307895800092710610e+4,
                              2.8729085735721942674e+4,
                              5.2264952788528545610e+3};
  static const double c[8] = {1.42343711074968357734e0,  4.63033784615654529590e0,
                              5.76949722146069140550e0,  3.64784832476320460504e0,
                              1.27045825245236838258e0,  2.41780725177450611770e-1,
                              2.27238449892691845833e-2, 7.74545014278341407640e-4};
  static const double d[8] = {1.0,
                              2.05319162663775882187e0,
                              1.67638483018380384940e0,
                              6.89767334985100004550e-1,
                              1.48103976427480074590e-1,
                              1.51986665636164571966e-2,
                              5.47593808499534494600e-4,
                              1.05075007164441684324e-9};
  static const double e[8] = {6.65790464350110377720e0,  5.46378491116411436990e0,
                              1.78482653991729133580e0,  2.96560571828504891230e-1,
                              2.65321895265761230930e-2, 1.24266094738807843860e-3,
                              2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static const double f[8] = {1.0,
                              5.99832206555887937690e-1,
                              1.36929880922735805310e-1,
                              1.48753612908506148525e-2,
                              7.86869131145613259100e-4,
                              1.84631831751005468180e-6,
                              1.42151175831644588870e-15};
  auto horner = [](const double* k, double x) {
    return ((((((k[7] * x + k[6]) * x + k[5]) * x + k[4]) * x + k[3]) * x + k[2]) * x +
            k[1]) * x + k[0];
  };
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    double r = 0.180625 - q * q;
    return q * horner(a, r) / horner(b, r);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = horner(c, r) / horner(d, r);
  } else {
    r -= 5.0;
    val = horner(e, r) / horner(f, r);
  }
  return q < 0.0 ? -val : val;
}

double c_w_hat(const ObservationTable& t, const RowQuantities& rows) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < t.n(); ++i)
    if (t.delta[i] == 1) s += rows.wgt[i] / t.q[i];
  return s / static_cast<double>(t.n());
}

InfluenceVector eif_full(const ObservationTable& t, const RowQuantities& rows,
                         Estimand estimand, double tau_hat, double c_w) {
  (void)estimand;
  if (!(c_w != 0.0)) throw std::invalid_argument("eif_full: C_w must be nonzero");
  InfluenceVector out;
  out.kind = "full_data";
  out.values.setZero(t.n());
  for (Eigen::Index i = 0; i < t.n(); ++i) {
    if (t.delta[i] != 1) continue;
    double resid = t.a[i] == 1
                       ? rows.wgt[i] / rows.e[i] * (t.y[i] - rows.mu1[i])
                       : -rows.wgt[i] / (1.0 - rows.e[i]) * (t.y[i] - rows.mu0[i]);
    double het = rows.tau[i] - tau_hat;
    out.values[i] =
        (resid + rows.wgt[i] * het + rows.wdot[i] * het * (t.a[i] - rows.e[i])) / c_w;
  }
  return out;
}

InfluenceVector eif_observed(const InfluenceVector& phi_full, const StratumIndex& strata,
                             const ObservationTable& t) {
  Eigen::VectorXd g = stratum_conditional_means(phi_full.values, strata, t);
  InfluenceVector out;
  out.kind = "observed";
  out.values.resize(t.n());
  for (Eigen::Index i = 0; i < t.n(); ++i) {
    double gk = g[strata.labels[static_cast<std::size_t>(i)]];
    out.values[i] = gk + t.delta[i] * (phi_full.values[i] - gk) / t.q[i];
  }
  return out;
}

InfluenceVector ipsw_observed(const InfluenceVector& phi_full, const ObservationTable& t) {
  InfluenceVector out;
  out.kind = "observed";
  out.values.resize(t.n());
  for (Eigen::Index i = 0; i < t.n(); ++i)
    out.values[i] = t.delta[i] * phi_full.values[i] / t.q[i];
  return out;
}

VarianceReport variance_eif(const InfluenceVector& phi, double estimate, double level) {
  const Eigen::Index n = phi.values.size();
  if (n < 2) throw std::invalid_argument("variance_eif: need n >= 2");
  double mean = phi.values.mean();
  double ss = (phi.values.array() - mean).square().sum();
  VarianceReport r;
  r.method = "eif";
  r.level = level;
  r.variance_of_if = ss / static_cast<double>(n - 1);
  r.se = std::sqrt(r.variance_of_if / static_cast<double>(n));
  double z = normal_quantile(0.5 + level / 2.0);
  r.ci_lo = estimate - z * r.se;
  r.ci_hi = estimate + z * r.se;
  return r;
}

namespace {

bool is_enriched(const std::string& estimator) {
  return estimator == "eiw" || estimator == "edr";
}
bool is_dr(const std::string& estimator) {
  return estimator == "sdr" || estimator == "edr";
}

// (1/n) * [ sum_{delta=1} s v + sum_i (1-s) g_v(S_i) ] — the enriched
// empirical mean; without strata just the delta/q-weighted mean.
double enriched_mean(const ObservationTable& t, const Eigen::VectorXd& values,
                     const StratumIndex* strata) {
  double acc = 0.0;
  Eigen::VectorXd g;
  if (strata) g = stratum_conditional_means(values, *strata, t);
  for (Eigen::Index i = 0; i < t.n(); ++i) {
    double s = t.delta[i] / t.q[i];
    if (t.delta[i] == 1) acc += s * values[i];
    if (strata) acc += (1.0 - s) * g[strata->labels[static_cast<std::size_t>(i)]];
  }
  return acc / static_cast<double>(t.n());
}

// Per-row observed moment contributions s v_i + (1-s) g_v(S_i).
Eigen::VectorXd observed_values(const ObservationTable& t, const Eigen::VectorXd& values,
                                const StratumIndex* strata) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(t.n());
  Eigen::VectorXd g;
  if (strata) g = stratum_conditional_means(values, *strata, t);
  for (Eigen::Index i = 0; i < t.n(); ++i) {
    double s = t.delta[i] / t.q[i];
    if (t.delta[i] == 1) out[i] += s * values[i];
    if (strata) out[i] += (1.0 - s) * g[strata->labels[static_cast<std::size_t>(i)]];
  }
  return out;
}

struct IwDenominators {
  double d1 = 0.0, d0 = 0.0;
};

// Main-equation values Psi per phase-2 row (n x dtheta; zero rows at
// delta=0), given nuisance coefficient vectors.  theta is held at the fit.
Eigen::MatrixXd psi_matrix(const ObservationTable& t, Estimand estimand, bool dr,
                           const Eigen::MatrixXd& xe, const Eigen::MatrixXd& xo,
                           const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta1,
                           const Eigen::VectorXd& beta0, double tau_hat, double mu1_hat,
                           double mu0_hat) {
  const Eigen::Index n = t.n();
  Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(n, dr ? 1 : 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (t.delta[i] != 1) continue;
    double e = expit(xe.row(i).dot(alpha));
    e = std::min(1.0 - kPsClampLo, std::max(kPsClampLo, e));
    WeightValue wv = weight_value(estimand, e);
    if (dr) {
      double m1 = expit(xo.row(i).dot(beta1));
      double m0 = expit(xo.row(i).dot(beta0));
      double resid = t.a[i] == 1 ? wv.w / e * (t.y[i] - m1)
                                 : -wv.w / (1.0 - e) * (t.y[i] - m0);
      double dden = wv.w + wv.wdot * (t.a[i] - e);
      psi(i, 0) = resid + dden * (m1 - m0 - tau_hat);
    } else {
      psi(i, 0) = tau_hat - mu1_hat + mu0_hat;
      if (t.a[i] == 1)
        psi(i, 1) = wv.w / e * (t.y[i] - mu1_hat);
      else
        psi(i, 2) = wv.w / (1.0 - e) * (t.y[i] - mu0_hat);
    }
  }
  return psi;
}

}  // namespace

InfluenceVector estimator_influence(const ObservationTable& t, const EstimateResult& est,
                                    const StratumIndex* strata) {
  const Eigen::Index n = t.n();
  const RowQuantities& r = est.rows;
  const bool enriched = is_enriched(est.estimator);
  if (enriched && !strata)
    throw std::invalid_argument("estimator_influence: enriched estimator needs strata");
  const StratumIndex* use = enriched ? strata : nullptr;

  InfluenceVector out;
  out.kind = "observed";
  out.centered = true;

  if (is_dr(est.estimator)) {
    Eigen::VectorXd psi = Eigen::VectorXd::Zero(n), dden = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (t.delta[i] != 1) continue;
      double resid = t.a[i] == 1
                         ? r.wgt[i] / r.e[i] * (t.y[i] - r.mu1[i])
                         : -r.wgt[i] / (1.0 - r.e[i]) * (t.y[i] - r.mu0[i]);
      dden[i] = r.wgt[i] + r.wdot[i] * (t.a[i] - r.e[i]);
      psi[i] = resid + dden[i] * (r.tau[i] - est.tau_hat);
    }
    double d = enriched_mean(t, dden, use);
    if (d == 0.0) throw std::runtime_error("estimator_influence: zero denominator");
    out.values = observed_values(t, psi, use) / d;
    return out;
  }

  Eigen::VectorXd h1 = Eigen::VectorXd::Zero(n), h0 = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd den1 = Eigen::VectorXd::Zero(n), den0 = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (t.delta[i] != 1) continue;
    if (t.a[i] == 1) {
      den1[i] = r.wgt[i] / r.e[i];
      h1[i] = den1[i] * (t.y[i] - est.mu1_hat);
    } else {
      den0[i] = r.wgt[i] / (1.0 - r.e[i]);
      h0[i] = den0[i] * (t.y[i] - est.mu0_hat);
    }
  }
  double d1 = enriched_mean(t, den1, use);
  double d0 = enriched_mean(t, den0, use);
  if (d1 == 0.0 || d0 == 0.0)
    throw std::runtime_error("estimator_influence: zero denominator");
  out.values = observed_values(t, h1, use) / d1 - observed_values(t, h0, use) / d0;
  return out;
}

VarianceReport variance_sandwich(const ObservationTable& t, const NuisanceBundle& bundle,
                                 const EstimateResult& est, Estimand estimand,
                                 const StratumIndex* strata, double level, bool ps_fixed) {
  const Eigen::Index n = t.n();
  const bool dr = is_dr(est.estimator);
  const bool enriched = is_enriched(est.estimator);
  if (enriched && !strata)
    throw std::invalid_argument("variance_sandwich: enriched estimator needs strata");
  const StratumIndex* use = enriched ? strata : nullptr;
  const int dtheta = dr ? 1 : 3;

  Eigen::MatrixXd xe = build_design(t, bundle.ps_columns);
  Eigen::MatrixXd xo;
  if (dr) xo = build_design(t, bundle.outcome_columns);
  const Eigen::VectorXd& alpha = bundle.ps.coefficients;
  Eigen::VectorXd beta1, beta0;
  if (dr) {
    beta1 = bundle.out1.coefficients;
    beta0 = bundle.out0.coefficients;
  }

  auto psi_at = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b1,
                    const Eigen::VectorXd& b0) {
    return psi_matrix(t, estimand, dr, xe, xo, a, b1, b0, est.tau_hat, est.mu1_hat,
                      est.mu0_hat);
  };
  Eigen::MatrixXd psi0 = psi_at(alpha, beta1, beta0);

  // Observed main-moment contributions m_theta per row.
  Eigen::MatrixXd m_theta(n, dtheta);
  for (int c = 0; c < dtheta; ++c)
    m_theta.col(c) = observed_values(t, psi0.col(c), use);

  // J_11: derivative of the main equations in theta (analytic).
  Eigen::MatrixXd j11(dtheta, dtheta);
  const RowQuantities& r = est.rows;
  if (dr) {
    Eigen::VectorXd dden = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i)
      if (t.delta[i] == 1) dden[i] = r.wgt[i] + r.wdot[i] * (t.a[i] - r.e[i]);
    j11(0, 0) = -enriched_mean(t, dden, use);
  } else {
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    Eigen::VectorXd den1 = Eigen::VectorXd::Zero(n), den0 = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (t.delta[i] != 1) continue;
      if (t.a[i] == 1)
        den1[i] = r.wgt[i] / r.e[i];
      else
        den0[i] = r.wgt[i] / (1.0 - r.e[i]);
    }
    double es = enriched_mean(t, ones, use);
    j11.setZero();
    j11(0, 0) = es;
    j11(0, 1) = es;
    j11(0, 2) = -es;
    j11(1, 2) = -enriched_mean(t, den1, use);
    j11(2, 1) = -enriched_mean(t, den0, use);
  }

  // Nuisance score blocks (exact logistic forms).
  Eigen::VectorXd s = (t.delta.cast<double>().array() / t.q.array()).matrix();
  const Eigen::Index pa = alpha.size();
  Eigen::MatrixXd m_alpha = Eigen::MatrixXd::Zero(n, pa);
  Eigen::MatrixXd j22 = Eigen::MatrixXd::Zero(pa, pa);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (t.delta[i] != 1) continue;
    double e = expit(xe.row(i).dot(alpha));
    m_alpha.row(i) = s[i] * (t.a[i] - e) * xe.row(i);
    j22.noalias() -= s[i] * e * (1.0 - e) * xe.row(i).transpose() * xe.row(i);
  }
  j22 /= static_cast<double>(n);

  Eigen::MatrixXd m_b1, m_b0, j33, j44;
  if (dr) {
    const Eigen::Index po = beta1.size();
    m_b1 = Eigen::MatrixXd::Zero(n, po);
    m_b0 = Eigen::MatrixXd::Zero(n, po);
    j33 = Eigen::MatrixXd::Zero(po, po);
    j44 = Eigen::MatrixXd::Zero(po, po);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (t.delta[i] != 1) continue;
      if (t.a[i] == 1) {
        double m1 = expit(xo.row(i).dot(beta1));
        m_b1.row(i) = s[i] * (t.y[i] - m1) * xo.row(i);
        j33.noalias() -= s[i] * m1 * (1.0 - m1) * xo.row(i).transpose() * xo.row(i);
      } else {
        double m0 = expit(xo.row(i).dot(beta0));
        m_b0.row(i) = s[i] * (t.y[i] - m0) * xo.row(i);
        j44.noalias() -= s[i] * m0 * (1.0 - m0) * xo.row(i).transpose() * xo.row(i);
      }
    }
    j33 /= static_cast<double>(n);
    j44 /= static_cast<double>(n);
  }

  // Cross blocks by central finite differences of the averaged main moment.
  auto moment_mean = [&](const Eigen::MatrixXd& psi) {
    Eigen::VectorXd g(dtheta);
    for (int c = 0; c < dtheta; ++c) g[c] = enriched_mean(t, psi.col(c), use);
    return g;
  };
  auto fd_block = [&](const Eigen::VectorXd& params, int which) {
    Eigen::MatrixXd block(dtheta, params.size());
    for (Eigen::Index j = 0; j < params.size(); ++j) {
      double h = 1e-6 * (1.0 + std::abs(params[j]));
      Eigen::VectorXd up = params, dn = params;
      up[j] += h;
      dn[j] -= h;
      Eigen::VectorXd gu, gd;
      if (which == 0) {
        gu = moment_mean(psi_at(up, beta1, beta0));
        gd = moment_mean(psi_at(dn, beta1, beta0));
      } else if (which == 1) {
        gu = moment_mean(psi_at(alpha, up, beta0));
        gd = moment_mean(psi_at(alpha, dn, beta0));
      } else {
        gu = moment_mean(psi_at(alpha, beta1, up));
        gd = moment_mean(psi_at(alpha, beta1, dn));
      }
      block.col(j) = (gu - gd) / (2.0 * h);
    }
    if (!block.allFinite())
      throw std::runtime_error("variance_sandwich: non-finite finite-difference entry");
    return block;
  };

  // Compose the per-row influence of theta: -J11^{-1} (m_theta - corrections).
  Eigen::MatrixXd corr = Eigen::MatrixXd::Zero(n, dtheta);
  if (!ps_fixed) {
    Eigen::MatrixXd j12 = fd_block(alpha, 0);
    Eigen::MatrixXd b12 = j22.transpose().fullPivLu().solve(j12.transpose()).transpose();
    corr.noalias() += m_alpha * b12.transpose();
  }
  if (dr) {
    Eigen::MatrixXd j13 = fd_block(beta1, 1);
    Eigen::MatrixXd j14 = fd_block(beta0, 2);
    Eigen::MatrixXd b13 = j33.transpose().fullPivLu().solve(j13.transpose()).transpose();
    Eigen::MatrixXd b14 = j44.transpose().fullPivLu().solve(j14.transpose()).transpose();
    corr.noalias() += m_b1 * b13.transpose();
    corr.noalias() += m_b0 * b14.transpose();
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu11(j11);
  if (!lu11.isInvertible())
    throw std::runtime_error("variance_sandwich: singular main Jacobian block");
  Eigen::MatrixXd phi_all = -(lu11.solve((m_theta - corr).transpose())).transpose();

  InfluenceVector phi;
  phi.kind = "stacked_sandwich";
  phi.centered = true;
  phi.values = phi_all.col(0);
  VarianceReport rep = variance_eif(phi, est.tau_hat, level);
  rep.method = "sandwich";
  return rep;
}

VarianceReport variance_for_estimate(const ObservationTable& t, const NuisanceBundle& bundle,
                                     const EstimateResult& est, const StratumIndex* strata,
                                     double level, const std::string& method,
                                     bool ps_fixed) {
  if (method == "eif") {
    InfluenceVector phi = estimator_influence(t, est, strata);
    VarianceReport rep = variance_eif(phi, est.tau_hat, level);
    rep.method = "eif";
    return rep;
  }
  if (method == "sandwich")
    return variance_sandwich(t, bundle, est, est.estimand, strata, level, ps_fixed);
  throw std::invalid_argument("unknown variance method '" + method + "'");
}

}  // namespace tpwate

#pragma once

// Reference stacked estimating-equation system for sandwich-variance
// comparisons, built entirely from oracle arithmetic.  Parameter layout:
// theta (1 for the augmented estimators, 3 as (tau, mu0, mu1) otherwise),
// then the propensity coefficients unless ps_fixed, then the two outcome
// coefficient blocks for the augmented estimators.

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "oracles.hpp"
#include "test_support.hpp"
#include "tpwate/estimators.hpp"
#include "tpwate/inference.hpp"

namespace stackoracle {

struct StackSpec {
  const tpwate::ObservationTable* t = nullptr;
  Eigen::MatrixXd xe, xo;
  bool dr = false;
  bool enriched = false;
  bool ps_fixed = false;
  int kind = 0;
  const tpwate::StratumIndex* strata = nullptr;
  int pa = 0, po = 0;
  Eigen::VectorXd fitted_alpha;

  int dtheta() const { return dr ? 1 : 3; }
  int dim() const { return dtheta() + (ps_fixed ? 0 : pa) + (dr ? 2 * po : 0); }

  Eigen::VectorXd observed(const Eigen::VectorXd& h) const {
    const Eigen::Index n = t->n();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd g;
    if (enriched) {
      std::vector<char> ph2(static_cast<std::size_t>(n));
      for (Eigen::Index i = 0; i < n; ++i)
        ph2[static_cast<std::size_t>(i)] = t->delta[i] == 1;
      g = oracle::group_means(h, strata->labels, ph2, strata->K());
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      double s = t->delta[i] / t->q[i];
      if (t->delta[i] == 1) out[i] += s * h[i];
      if (enriched) out[i] += (1.0 - s) * g[strata->labels[static_cast<std::size_t>(i)]];
    }
    return out;
  }

  Eigen::MatrixXd rows(const Eigen::VectorXd& params) const {
    const Eigen::Index n = t->n();
    const int dt = dtheta();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, dim());

    int off = dt;
    Eigen::VectorXd alpha = ps_fixed ? fitted_alpha : params.segment(off, pa);
    if (!ps_fixed) off += pa;
    Eigen::VectorXd beta1, beta0;
    if (dr) {
      beta1 = params.segment(off, po);
      beta0 = params.segment(off + po, po);
    }

    Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(n, dt);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (t->delta[i] != 1) continue;
      double e = oracle::expit(xe.row(i).dot(alpha));
      double w = oracle::tilt_w(kind, e), wdot = oracle::tilt_wdot(kind, e);
      if (dr) {
        double m1 = oracle::expit(xo.row(i).dot(beta1));
        double m0 = oracle::expit(xo.row(i).dot(beta0));
        double resid = t->a[i] == 1 ? w / e * (t->y[i] - m1)
                                    : -w / (1.0 - e) * (t->y[i] - m0);
        double dden = w + wdot * (t->a[i] - e);
        psi(i, 0) = resid + dden * (m1 - m0 - params[0]);
      } else {
        psi(i, 0) = params[0] - params[2] + params[1];  // tau - mu1 + mu0
        if (t->a[i] == 1)
          psi(i, 1) = w / e * (t->y[i] - params[2]);
        else
          psi(i, 2) = w / (1.0 - e) * (t->y[i] - params[1]);
      }
    }
    for (int c = 0; c < dt; ++c) out.col(c) = observed(psi.col(c));

    int col = dt;
    if (!ps_fixed) {
      for (Eigen::Index i = 0; i < n; ++i) {
        if (t->delta[i] != 1) continue;
        double s = 1.0 / t->q[i];
        double e = oracle::expit(xe.row(i).dot(alpha));
        out.block(i, col, 1, pa) = s * (t->a[i] - e) * xe.row(i);
      }
      col += pa;
    }
    if (dr) {
      for (Eigen::Index i = 0; i < n; ++i) {
        if (t->delta[i] != 1) continue;
        double s = 1.0 / t->q[i];
        if (t->a[i] == 1) {
          double m1 = oracle::expit(xo.row(i).dot(beta1));
          out.block(i, col, 1, po) = s * (t->y[i] - m1) * xo.row(i);
        } else {
          double m0 = oracle::expit(xo.row(i).dot(beta0));
          out.block(i, col + po, 1, po) = s * (t->y[i] - m0) * xo.row(i);
        }
      }
    }
    return out;
  }
};

// Library fit and sandwich on one side, oracle numeric influence on the
// other; returns (library report, oracle tau influence values per row).
inline std::pair<tpwate::VarianceReport, Eigen::VectorXd> compare_setup(
    const tpwate::ObservationTable& t, const tpwate::StratumIndex* strata,
    const tpwate::NuisanceBundle& b, const std::string& estimator,
    tpwate::Estimand estimand, bool ps_fixed) {
  using namespace tpwate;
  EstimateResult est = estimate(estimator, t, b, estimand, strata);
  VarianceReport lib =
      variance_sandwich(t, b, est, estimand, strata, 0.95, ps_fixed);

  StackSpec spec;
  spec.t = &t;
  spec.xe = build_design(t, b.ps_columns);
  spec.dr = estimator == "sdr" || estimator == "edr";
  spec.enriched = estimator == "eiw" || estimator == "edr";
  spec.ps_fixed = ps_fixed;
  spec.kind = testsup::kind_of(estimand);
  spec.strata = strata;
  spec.pa = static_cast<int>(b.ps.coefficients.size());
  spec.fitted_alpha = b.ps.coefficients;
  if (spec.dr) {
    spec.xo = build_design(t, b.outcome_columns);
    spec.po = static_cast<int>(b.out1.coefficients.size());
  }

  Eigen::VectorXd at(spec.dim());
  if (spec.dr)
    at[0] = est.tau_hat;
  else {
    at[0] = est.tau_hat;
    at[1] = est.mu0_hat;
    at[2] = est.mu1_hat;
  }
  int off = spec.dtheta();
  if (!ps_fixed) {
    at.segment(off, spec.pa) = b.ps.coefficients;
    off += spec.pa;
  }
  if (spec.dr) {
    at.segment(off, spec.po) = b.out1.coefficients;
    at.segment(off + spec.po, spec.po) = b.out0.coefficients;
  }

  Eigen::MatrixXd phi = oracle::numeric_influence(
      [&spec](const Eigen::VectorXd& p) { return spec.rows(p); }, at, spec.dtheta());
  return {lib, phi.col(0)};
}

}  // namespace stackoracle

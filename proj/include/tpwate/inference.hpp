#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

#include "tpwate/estimators.hpp"

namespace tpwate {

struct InfluenceVector {
  Eigen::VectorXd values;
  std::string kind;  // full_data | observed | stacked_sandwich
  bool centered = false;
};

struct VarianceReport {
  double variance_of_if = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double level = 0.95;
  std::string method;  // eif | sandwich
};

// Standard normal quantile (Wichura's AS241 algorithm, double precision).
double normal_quantile(double p);

// Plug-in normalizer C_w = (1/n) sum_i (delta_i/q_i) w_i.
double c_w_hat(const ObservationTable& t, const RowQuantities& rows);

// Full-data efficient influence values at the fitted quantities; defined on
// phase-2 rows (zero elsewhere).
InfluenceVector eif_full(const ObservationTable& t, const RowQuantities& rows,
                         Estimand estimand, double tau_hat, double c_w);

// Observed-data influence values g(S) + delta (phi - g(S)) / q over all rows.
InfluenceVector eif_observed(const InfluenceVector& phi_full, const StratumIndex& strata,
                             const ObservationTable& t);

// delta/q-weighted full-data values (the non-enriched observed influence).
InfluenceVector ipsw_observed(const InfluenceVector& phi_full, const ObservationTable& t);

// Sample variance (divisor n-1) of an influence vector over all n rows;
// Wald interval around `estimate`.
VarianceReport variance_eif(const InfluenceVector& phi, double estimate, double level);

// Stacked-estimating-equation sandwich variance for a fitted estimator.
// Analytic diagonal blocks, central finite differences for the nuisance
// cross blocks (step 1e-6*(1+|param|)).  `ps_fixed` drops the propensity
// correction (propensity treated as known).
VarianceReport variance_sandwich(const ObservationTable& t, const NuisanceBundle& bundle,
                                 const EstimateResult& est, Estimand estimand,
                                 const StratumIndex* strata, double level,
                                 bool ps_fixed = false);

// Default per-estimator plug-in influence values (nuisances treated as
// known): exact-mean-zero at the fitted point estimates.
InfluenceVector estimator_influence(const ObservationTable& t, const EstimateResult& est,
                                    const StratumIndex* strata);

// Dispatch: method "eif" uses estimator_influence, "sandwich" the stacked
// system.
VarianceReport variance_for_estimate(const ObservationTable& t, const NuisanceBundle& bundle,
                                     const EstimateResult& est, const StratumIndex* strata,
                                     double level, const std::string& method,
                                     bool ps_fixed = false);

}  // namespace tpwate

#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "tpwate/estimand.hpp"
#include "tpwate/glm.hpp"
#include "tpwate/table.hpp"

namespace tpwate {

// Propensity and outcome working models fitted on the same table, plus the
// column lists that built their design matrices.
struct NuisanceBundle {
  FittedGLM ps;
  FittedGLM out1;
  FittedGLM out0;
  std::vector<std::string> ps_columns;
  std::vector<std::string> outcome_columns;
};

// Design matrix (1, columns...) where names refer to V or W columns.
Eigen::MatrixXd build_design(const ObservationTable& t,
                             const std::vector<std::string>& columns);

// Fit e(x;alpha) on phase-2 rows (weights delta/q) and mu_a(x;beta^a) on
// phase-2 rows of each arm.
NuisanceBundle fit_nuisances(const ObservationTable& t,
                             const std::vector<std::string>& ps_columns,
                             const std::vector<std::string>& outcome_columns);
// Propensity model only (inverse-weighting estimators).
NuisanceBundle fit_ps_only(const ObservationTable& t,
                           const std::vector<std::string>& ps_columns);

// Fitted per-row quantities on phase-2 rows (NaN elsewhere).
struct RowQuantities {
  Eigen::VectorXd e;     // clamped propensity
  Eigen::VectorXd mu1;   // arm-1 outcome prediction (NaN for IPW-only bundles)
  Eigen::VectorXd mu0;
  Eigen::VectorXd wgt;   // w_e(e)
  Eigen::VectorXd wdot;  // dw_e/de
  Eigen::VectorXd tau;   // mu1 - mu0
  int clamp_count = 0;
};

// Predictions are clamped to [kPsClampLo, 1-kPsClampLo]; clamps are counted.
inline constexpr double kPsClampLo = 1e-6;

RowQuantities compute_rows(const ObservationTable& t, const NuisanceBundle& bundle,
                           Estimand estimand, bool with_outcomes);

struct EstimateResult {
  Estimand estimand;
  std::string estimator;  // siw | eiw | sdr | edr
  double tau_hat = 0.0;
  double mu1_hat = std::numeric_limits<double>::quiet_NaN();
  double mu0_hat = std::numeric_limits<double>::quiet_NaN();
  RowQuantities rows;
  // Per-stratum augmentation means, one column per augmented integrand
  // (empty for the simple estimators).
  Eigen::MatrixXd stratum_means;
  std::vector<std::string> stratum_mean_names;
  std::vector<int> empty_strata;
};

// Mean of `values` over phase-2 rows within each stratum.  `values` must be
// defined (finite) wherever delta=1.
Eigen::VectorXd stratum_conditional_means(const Eigen::VectorXd& values,
                                          const StratumIndex& strata,
                                          const ObservationTable& t);

EstimateResult estimate_siw(const ObservationTable& t, const NuisanceBundle& bundle,
                            Estimand estimand);
EstimateResult estimate_eiw(const ObservationTable& t, const NuisanceBundle& bundle,
                            Estimand estimand, const StratumIndex& strata);
EstimateResult estimate_sdr(const ObservationTable& t, const NuisanceBundle& bundle,
                            Estimand estimand);
EstimateResult estimate_edr(const ObservationTable& t, const NuisanceBundle& bundle,
                            Estimand estimand, const StratumIndex& strata);

// Dispatch by name; strata required for eiw/edr.
EstimateResult estimate(const std::string& estimator, const ObservationTable& t,
                        const NuisanceBundle& bundle, Estimand estimand,
                        const StratumIndex* strata);

}  // namespace tpwate

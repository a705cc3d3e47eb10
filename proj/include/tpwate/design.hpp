#pragma once

#include <Eigen/Dense>
#include <vector>

#include "tpwate/estimand.hpp"

namespace tpwate {

// Stratum-level planning inputs: shares p_k, conditional SDs sigma_k of the
// full-data influence function, optional conditional means xi_k, and the
// overall sampling fraction qbar.
struct DesignInput {
  Eigen::VectorXd p;
  Eigen::VectorXd sigma;
  Eigen::VectorXd xi;  // may be empty
  double qbar = 0.0;

  bool has_xi() const { return xi.size() == sigma.size() && xi.size() > 0; }
};

struct DesignOutput {
  Eigen::VectorXd q;
  double objective = 0.0;               // sum_k p_k c_k / q_k at the optimum
  double objective_proportional = 0.0;  // same objective at q_k = qbar
  bool feasible = true;                 // all q_k <= 1
  double max_q = 0.0;
};

// Variance-minimizing allocation q_k = qbar * sigma_k / sum_j p_j sigma_j.
DesignOutput neyman_allocation(const DesignInput& input);

// Allocation minimizing the IPSW (non-enriched) variance: c_k = sigma_k^2 +
// xi_k^2.
DesignOutput ipsw_allocation(const DesignInput& input);

// Unnormalized allocation scores w_e(e_k) / sqrt(e_k (1 - e_k)) for the
// no-heterogeneity, homoskedastic shortcut.
Eigen::VectorXd simple_design_scores(Estimand estimand, const Eigen::VectorXd& e_by_stratum);

// Plug-in evaluation of the efficiency bound from draws of the full-data
// influence function, via both algebraically identical decompositions.
struct BoundReport {
  double v_w = 0.0;      // Var(E[phi|S]) + E[Var(phi|S)/q]
  double v_w_alt = 0.0;  // Var(phi) + E[(1/q - 1) Var(phi|S)]
};

BoundReport efficiency_bound(const Eigen::VectorXd& phi, const std::vector<int>& stratum_of,
                             const Eigen::VectorXd& q_by_stratum);

// Enrichment gain G = E[(1/q - 1) E[phi|S]^2] >= 0.
double enrichment_gain(const Eigen::VectorXd& phi, const std::vector<int>& stratum_of,
                       const Eigen::VectorXd& q_by_stratum);

}  // namespace tpwate

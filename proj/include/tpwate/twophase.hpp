#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>

#include "tpwate/table.hpp"

namespace tpwate {

// Independent Bernoulli(q_k) phase-2 inclusion per row.  Draws are keyed by
// (seed, scheme, stratum, row) so they do not depend on evaluation order.
std::pair<Eigen::VectorXi, Eigen::VectorXd> poisson_sample(
    const StratumIndex& strata, const Eigen::VectorXd& q_by_stratum, std::uint64_t seed);

// Exactly m_k rows uniformly without replacement per stratum; q = m_k / n_k.
std::pair<Eigen::VectorXi, Eigen::VectorXd> srswor_sample(
    const StratumIndex& strata, const Eigen::VectorXi& m_by_stratum, std::uint64_t seed);

// Precomputed per-stratum probabilities q_k = min(1, (m/K) / (n * phat_k))
// targeting an equal expected number of phase-2 units per stratum, with
// stratum shares phat_k taken from a reference index.
struct ReferenceProbabilities {
  Eigen::VectorXd q;  // aligned with the reference stratum order
  int capped_count = 0;
};

ReferenceProbabilities reference_probabilities(const StratumIndex& reference_strata,
                                               double m, double n);

// Map a per-stratum quantity from one stratum index to another by key tuple.
// Throws if a target stratum's key is absent in the source.
Eigen::VectorXd map_stratum_quantity(const StratumIndex& source,
                                     const Eigen::VectorXd& values,
                                     const StratumIndex& target);

}  // namespace tpwate

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "tpwate/table.hpp"

namespace tpwate {

struct JackknifePlan {
  int D = 0;
  std::vector<int> group_of;  // per-row group id in [0, D)
  std::uint64_t seed = 0;
  bool stratified_by_phase = true;
};

// Seeded partition into D groups, stratified by sampling phase: rows of each
// phase are shuffled and dealt round-robin, the second phase continuing at
// the offset where the first stopped so group sizes stay within 1 of each
// other both per phase and overall.
JackknifePlan partition_stratified(Eigen::Index n, const Eigen::VectorXi& delta, int D,
                                   std::uint64_t seed);

struct JackknifeResult {
  double corrected = 0.0;
  double full = 0.0;
  std::vector<double> replicates;
};

// Delete-d bias correction: D * theta_full - (D-1) * mean(leave-one-group-out
// replicates).
JackknifeResult jackknife_correct(const std::function<double(const ObservationTable&)>& fn,
                                  const ObservationTable& table, const JackknifePlan& plan);

// Same partition applied to a closure returning several statistics at once
// (shared nuisance fits across estimators).
std::vector<JackknifeResult> jackknife_correct_multi(
    const std::function<std::vector<double>(const ObservationTable&)>& fn,
    const ObservationTable& table, const JackknifePlan& plan);

}  // namespace tpwate

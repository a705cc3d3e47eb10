#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tpwate/estimand.hpp"
#include "tpwate/table.hpp"
#include "tpwate/twophase.hpp"

namespace tpwate {

// Synthetic cohort: eight cheap binary covariates V, one expensive
// confounder W, binary treatment and potential outcomes.
struct Population {
  Eigen::VectorXi a;
  Eigen::MatrixXd v;  // n x 8, binary
  Eigen::VectorXd w;
  Eigen::VectorXd y1, y0, y;
  Eigen::VectorXd e_true;  // P(A=1 | V, W)

  Eigen::Index n() const { return a.size(); }
};

Population generate_population(Eigen::Index n, std::uint64_t seed);

// Single-phase ObservationTable view of a population (delta=1, q=1).
ObservationTable population_table(const Population& pop);

// Streaming pass over a large reference population: plug-in target values,
// treatment prevalence, and the joint counts needed to reconstruct stratum
// shares for any (sampling-design, observed-V) combination.
struct ReferenceSummary {
  long long n = 0;
  double prevalence = 0.0;
  double truths[4] = {0, 0, 0, 0};       // indexed by Estimand enum order
  long long counts[8][2][2][2] = {{{{0}}}};  // [v index][a][v value][y]
};

ReferenceSummary reference_summary(long long n, std::uint64_t seed);

double true_value(const ReferenceSummary& s, Estimand estimand);

// Per-stratum Poisson probabilities targeting an equal expected phase-2
// count per stratum, with shares from the reference.  Key order matches
// build_strata on key columns (A, V_j[, Y]).
struct ReferenceDesign {
  std::vector<std::vector<double>> keys;
  Eigen::VectorXd q;
  int capped_count = 0;
};

ReferenceDesign reference_design(const ReferenceSummary& s, bool ods, int v_obs, double m,
                                 double n_phase1);

Eigen::VectorXd align_reference_q(const ReferenceDesign& rd, const StratumIndex& target);

// Equal-allocation apportionment of m into K integer counts (first m%K
// strata receive the extra unit).
Eigen::VectorXi equal_allocation(int m, int K);

struct ScenarioConfig {
  int m = 1000;
  int n_multiplier = 10;
  std::string scheme = "poisson";  // poisson | srswor
  bool ods = true;
  int v_obs = 1;  // which V_j is observed at phase 1 (1-based)
  std::vector<Estimand> estimands = {Estimand::ATE};
  std::vector<std::string> estimators = {"siw", "eiw", "sdr", "edr"};
  int replications = 1000;
  std::uint64_t seed = 1;
  int jackknife = 0;  // delete-d groups; 0 disables
  long long reference_n = 1000000;
  std::string var_method = "eif";
  double level = 0.95;
  std::vector<std::string> ps_columns;       // empty: V1..V8 and W
  std::vector<std::string> outcome_columns;  // empty: V1..V8 and W
  int threads = 1;
  std::string name;

  Eigen::Index n() const { return static_cast<Eigen::Index>(m) * n_multiplier; }
  // True when every enumerated field lies on the studied grid.
  bool on_grid() const;
};

struct ReplicationCell {
  std::string estimator;  // siw | eiw | sdr | edr | oracle
  Estimand estimand = Estimand::ATE;
  double tau = 0.0;
  double se = 0.0, ci_lo = 0.0, ci_hi = 0.0;  // NaN for oracle
  double tau_corrected = 0.0;                 // NaN unless jackknifed
};

struct ReplicationRecord {
  int rep = 0;
  bool ok = false;
  std::string error;
  std::vector<ReplicationCell> cells;
};

struct ScenarioResult {
  ScenarioConfig config;
  std::map<Estimand, double> truths;
  double prevalence = 0.0;
  std::vector<ReplicationRecord> records;
  int failures = 0;
};

ScenarioResult run_scenario(const ScenarioConfig& config);

struct MetricsRow {
  std::string scenario;
  std::string estimator;
  Estimand estimand = Estimand::ATE;
  bool corrected = false;
  int replications_used = 0;
  double truth = 0.0;
  double bias = 0.0;
  double emp_se = 0.0;
  double rmse = 0.0;
  double rel_emp_se = 0.0;  // relative to the oracle benchmark
  double rel_rmse = 0.0;
  double pct_gain = 0.0;  // enriched vs its simple counterpart
  double coverage = 0.0;
};

std::vector<MetricsRow> summarize(const ScenarioResult& result);

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);
void write_metrics_markdown(std::ostream& out, const std::vector<MetricsRow>& rows);

}  // namespace tpwate

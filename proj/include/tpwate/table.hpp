#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

namespace tpwate {

// Column-role assignment for CSV ingestion.
struct ColumnRoles {
  std::string delta_col;
  std::string q_col;
  std::string treat_col;
  std::string outcome_col;
  std::vector<std::string> v_cols;
  std::vector<std::string> w_cols;
};

// Two-phase observational data.  Phase-1 rows carry treatment, the low-cost
// covariates V, the phase-2 indicator delta and the known sampling
// probability q.  The high-cost covariates W (and, under outcome-dependent
// phase-1 collection, possibly Y) are observed only where delta=1; missing
// cells hold NaN.  Immutable after construction.
struct ObservationTable {
  Eigen::VectorXi a;    // treatment, 0/1
  Eigen::VectorXd y;    // outcome; NaN allowed only where delta=0
  Eigen::MatrixXd v;    // n x p1 low-cost covariates, fully observed
  Eigen::MatrixXd w;    // n x p2 high-cost covariates; NaN where delta=0
  Eigen::VectorXi delta;
  Eigen::VectorXd q;    // in (0,1]
  std::vector<std::string> v_names;
  std::vector<std::string> w_names;
  std::string treat_name = "a";
  std::string outcome_name = "y";

  Eigen::Index n() const { return a.size(); }
  Eigen::Index phase2_count() const { return delta.sum(); }

  // Throws std::invalid_argument on the first invariant violation.
  void check() const;

  // Value of a named phase-1 column (treatment, outcome, or a V column).
  // Used for stratum keys; W columns are rejected because they are not
  // fully observed at phase 1.
  double phase1_value(const std::string& column, Eigen::Index row) const;

  // Row-subset copy preserving order.
  ObservationTable subset(const std::vector<int>& keep_rows) const;
};

ObservationTable load_observations(std::istream& in, const ColumnRoles& roles);
ObservationTable load_observations_file(const std::string& path, const ColumnRoles& roles);
void save_observations(std::ostream& out, const ObservationTable& t);
void save_observations_file(const std::string& path, const ObservationTable& t);

// Partition of phase-1 rows by the distinct value tuples of the key columns.
// Stratum labels are 0-based, assigned in lexicographic key-tuple order.
struct StratumIndex {
  std::vector<std::string> key_columns;
  std::vector<int> labels;                // per-row stratum id in [0, K)
  std::vector<std::vector<double>> keys;  // per-stratum key tuple
  std::vector<int> counts;                // n_k
  std::vector<int> phase2_counts;         // m_k
  std::vector<double> shares;             // n_k / n

  int K() const { return static_cast<int>(keys.size()); }
};

StratumIndex build_strata(const ObservationTable& t,
                          const std::vector<std::string>& key_columns);

struct ValidationReport {
  std::vector<std::string> violations;
  std::vector<std::string> warnings;
  std::vector<std::string> notes;
  double phase2_fraction = 0.0;
  std::vector<int> stratum_phase2_counts;

  bool ok() const { return violations.empty(); }
};

ValidationReport validate(const ObservationTable& t);
ValidationReport validate(const ObservationTable& t, const StratumIndex& s);

// 17-significant-digit formatting used for all numeric file output so that
// values round-trip exactly.
std::string format_double(double x);

}  // namespace tpwate

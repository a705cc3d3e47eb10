#pragma once

// Shared synthetic-data fixtures for the unit tests.  Data generation uses
// the standard <random> engines rather than the library's generator so the
// fixtures do not depend on the code under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "oracles.hpp"
#include "tpwate/estimators.hpp"
#include "tpwate/table.hpp"

namespace testsup {

struct Toy {
  tpwate::ObservationTable table;
  tpwate::StratumIndex strata;  // keyed on (A, V1)
};

// Two binary phase-1 covariates, one continuous phase-2 covariate, logistic
// treatment and outcome.  Phase 2 is drawn per (A, V1) cell by Poisson or
// SRSWOR sampling; W1 is masked outside phase 2 unless the table is built as
// single-phase.
inline Toy make_toy(int n, std::uint64_t seed, bool srswor = false,
                    bool single_phase = false) {
  const double cell_q[4] = {0.9, 0.45, 0.6, 0.35};
  for (int attempt = 0; attempt < 50; ++attempt) {
    std::mt19937_64 gen(seed + 1000003ULL * static_cast<std::uint64_t>(attempt));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> norm(0.0, 1.0);

    tpwate::ObservationTable t;
    t.a.resize(n);
    t.y.resize(n);
    t.v.resize(n, 2);
    t.w.resize(n, 1);
    t.delta.resize(n);
    t.q.resize(n);
    t.v_names = {"V1", "V2"};
    t.w_names = {"W1"};
    t.treat_name = "A";
    t.outcome_name = "Y";

    for (int i = 0; i < n; ++i) {
      double v1 = unif(gen) < 0.5 ? 1.0 : 0.0;
      double v2 = unif(gen) < 0.5 ? 1.0 : 0.0;
      double w1 = norm(gen);
      int a = unif(gen) < oracle::expit(-0.3 + 0.8 * v1 - 0.5 * v2 + 0.7 * w1) ? 1 : 0;
      int y = unif(gen) < oracle::expit(-0.4 + 0.7 * a + 0.5 * v1 - 0.3 * v2 + 0.8 * w1)
                  ? 1
                  : 0;
      t.v(i, 0) = v1;
      t.v(i, 1) = v2;
      t.w(i, 0) = w1;
      t.a[i] = a;
      t.y[i] = y;
    }

    if (single_phase) {
      t.delta.setOnes();
      t.q.setOnes();
    } else if (!srswor) {
      for (int i = 0; i < n; ++i) {
        int cell = 2 * t.a[i] + static_cast<int>(t.v(i, 0));
        t.q[i] = cell_q[cell];
        t.delta[i] = unif(gen) < cell_q[cell] ? 1 : 0;
      }
    } else {
      std::vector<std::vector<int>> rows_of(4);
      for (int i = 0; i < n; ++i)
        rows_of[2 * t.a[i] + static_cast<int>(t.v(i, 0))].push_back(i);
      for (int cell = 0; cell < 4; ++cell) {
        auto& rows = rows_of[cell];
        int nk = static_cast<int>(rows.size());
        if (nk == 0) continue;
        int mk = std::max(1, static_cast<int>(std::lround(cell_q[cell] * nk)));
        std::shuffle(rows.begin(), rows.end(), gen);
        double qk = static_cast<double>(mk) / nk;
        for (int j = 0; j < nk; ++j) {
          t.delta[rows[static_cast<std::size_t>(j)]] = j < mk ? 1 : 0;
          t.q[rows[static_cast<std::size_t>(j)]] = qk;
        }
      }
    }

    if (!single_phase)
      for (int i = 0; i < n; ++i)
        if (t.delta[i] == 0) t.w(i, 0) = std::numeric_limits<double>::quiet_NaN();

    // The fixture must support every nuisance fit: both treatment classes in
    // phase 2, both outcome classes within each phase-2 arm, and no empty
    // phase-2 stratum.
    int n_cell2[4] = {0, 0, 0, 0};
    int arm_y[2][2] = {{0, 0}, {0, 0}};
    for (int i = 0; i < n; ++i) {
      if (t.delta[i] != 1) continue;
      ++n_cell2[2 * t.a[i] + static_cast<int>(t.v(i, 0))];
      ++arm_y[t.a[i]][static_cast<int>(t.y[i])];
    }
    bool ok = true;
    for (int cell = 0; cell < 4; ++cell) ok = ok && n_cell2[cell] >= 2;
    for (int arm = 0; arm < 2; ++arm)
      ok = ok && arm_y[arm][0] >= 1 && arm_y[arm][1] >= 1;
    if (!ok) continue;

    Toy toy;
    toy.table = std::move(t);
    toy.strata = tpwate::build_strata(toy.table, {"A", "V1"});
    return toy;
  }
  throw std::runtime_error("make_toy: could not build a usable fixture");
}

// Oracle-side view of a table plus fitted per-row nuisance values.
inline oracle::EqData eq_from(const tpwate::ObservationTable& t,
                              const tpwate::RowQuantities& rows,
                              const tpwate::StratumIndex* strata, bool enriched) {
  oracle::EqData d;
  d.a = t.a;
  d.delta = t.delta;
  d.y = t.y;
  d.q = t.q;
  d.e = rows.e;
  d.mu1 = rows.mu1;
  d.mu0 = rows.mu0;
  d.enriched = enriched;
  if (strata) {
    d.label = strata->labels;
    d.K = strata->K();
  } else {
    d.label.assign(static_cast<std::size_t>(t.n()), 0);
    d.K = 1;
  }
  return d;
}

inline int kind_of(tpwate::Estimand e) {
  switch (e) {
    case tpwate::Estimand::ATE: return 0;
    case tpwate::Estimand::ATT: return 1;
    case tpwate::Estimand::ATC: return 2;
    default: return 3;
  }
}

inline const std::vector<tpwate::Estimand>& all_estimands() {
  static const std::vector<tpwate::Estimand> all = {
      tpwate::Estimand::ATE, tpwate::Estimand::ATT, tpwate::Estimand::ATC,
      tpwate::Estimand::ATO};
  return all;
}

}  // namespace testsup

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "tpwate/table.hpp"
#include "tpwate/twophase.hpp"

using namespace tpwate;

namespace {

StratumIndex two_strata(int n0, int n1) {
  StratumIndex s;
  s.key_columns = {"G"};
  s.keys = {{0.0}, {1.0}};
  s.counts = {n0, n1};
  s.phase2_counts = {0, 0};
  const int n = n0 + n1;
  s.shares = {static_cast<double>(n0) / n, static_cast<double>(n1) / n};
  s.labels.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) s.labels.push_back(i < n0 ? 0 : 1);
  return s;
}

}  // namespace

TEST_CASE("poisson sampling is deterministic and hits its stratum rates") {
  StratumIndex s = two_strata(5000, 4000);
  Eigen::VectorXd qk(2);
  qk << 0.3, 0.85;
  auto [delta, q] = poisson_sample(s, qk, 77);
  auto [delta2, q2] = poisson_sample(s, qk, 77);
  CHECK((delta.array() == delta2.array()).all());
  CHECK((q.array() == q2.array()).all());
  auto [delta3, q3] = poisson_sample(s, qk, 78);
  CHECK((delta.array() != delta3.array()).any());

  double hit0 = 0.0, hit1 = 0.0;
  for (std::size_t i = 0; i < s.labels.size(); ++i) {
    int k = s.labels[i];
    CHECK(q[static_cast<Eigen::Index>(i)] == qk[k]);
    int d = delta[static_cast<Eigen::Index>(i)];
    CHECK((d == 0 || d == 1));
    (k == 0 ? hit0 : hit1) += d;
  }
  hit0 /= 5000.0;
  hit1 /= 4000.0;
  CHECK(std::abs(hit0 - 0.3) < 4.0 * std::sqrt(0.3 * 0.7 / 5000.0));
  CHECK(std::abs(hit1 - 0.85) < 4.0 * std::sqrt(0.85 * 0.15 / 4000.0));

  // q = 1 is a census of the stratum.
  Eigen::VectorXd census(2);
  census << 1.0, 0.5;
  auto [dc, qc] = poisson_sample(s, census, 5);
  for (std::size_t i = 0; i < s.labels.size(); ++i)
    if (s.labels[i] == 0) CHECK(dc[static_cast<Eigen::Index>(i)] == 1);
}

TEST_CASE("poisson sampling validates probabilities") {
  StratumIndex s = two_strata(4, 4);
  Eigen::VectorXd bad(2);
  bad << 0.5, 0.0;
  CHECK_THROWS_WITH_AS(poisson_sample(s, bad, 1),
                       doctest::Contains("q out of (0,1] for stratum 1"),
                       std::invalid_argument);
  bad << 0.5, 1.2;
  CHECK_THROWS_AS(poisson_sample(s, bad, 1), std::invalid_argument);
  Eigen::VectorXd one(1);
  one << 0.5;
  CHECK_THROWS_WITH_AS(poisson_sample(s, one, 1),
                       doctest::Contains("one probability per stratum"),
                       std::invalid_argument);
}

TEST_CASE("without-replacement sampling draws exact counts at exact rates") {
  StratumIndex s = two_strata(10, 8);
  Eigen::VectorXi m(2);
  m << 4, 3;
  auto [delta, q] = srswor_sample(s, m, 31);
  int got0 = 0, got1 = 0;
  for (std::size_t i = 0; i < s.labels.size(); ++i) {
    int d = delta[static_cast<Eigen::Index>(i)];
    (s.labels[i] == 0 ? got0 : got1) += d;
    CHECK(q[static_cast<Eigen::Index>(i)] ==
          doctest::Approx(s.labels[i] == 0 ? 0.4 : 0.375).epsilon(1e-15));
  }
  CHECK(got0 == 4);
  CHECK(got1 == 3);

  auto [delta2, q2] = srswor_sample(s, m, 31);
  CHECK((delta.array() == delta2.array()).all());

  // Inclusion is uniform across rows: frequency over many seeds matches m/n.
  const int trials = 500;
  Eigen::VectorXd freq = Eigen::VectorXd::Zero(18);
  bool saw_different = false;
  for (int t = 0; t < trials; ++t) {
    auto [d, qq] = srswor_sample(s, m, 1000 + static_cast<std::uint64_t>(t));
    for (Eigen::Index i = 0; i < 18; ++i) freq[i] += d[i];
    if ((d.array() != delta.array()).any()) saw_different = true;
  }
  CHECK(saw_different);
  freq /= static_cast<double>(trials);
  for (Eigen::Index i = 0; i < 18; ++i) {
    double p = i < 10 ? 0.4 : 0.375;
    CHECK(std::abs(freq[i] - p) < 4.5 * std::sqrt(p * (1 - p) / trials));
  }

  // Degenerate counts: none and all.
  Eigen::VectorXi edges(2);
  edges << 0, 8;
  auto [de, qe] = srswor_sample(s, edges, 3);
  for (std::size_t i = 0; i < s.labels.size(); ++i) {
    if (s.labels[i] == 0) {
      CHECK(de[static_cast<Eigen::Index>(i)] == 0);
      CHECK(qe[static_cast<Eigen::Index>(i)] == 0.0);
    } else {
      CHECK(de[static_cast<Eigen::Index>(i)] == 1);
      CHECK(qe[static_cast<Eigen::Index>(i)] == 1.0);
    }
  }

  Eigen::VectorXi over(2);
  over << 11, 3;
  CHECK_THROWS_WITH_AS(srswor_sample(s, over, 1),
                       doctest::Contains("m_k out of [0, n_k] for stratum 0"),
                       std::invalid_argument);
  Eigen::VectorXi neg(2);
  neg << -1, 3;
  CHECK_THROWS_AS(srswor_sample(s, neg, 1), std::invalid_argument);
  Eigen::VectorXi short_m(1);
  short_m << 2;
  CHECK_THROWS_WITH_AS(srswor_sample(s, short_m, 1),
                       doctest::Contains("one target count per stratum"),
                       std::invalid_argument);
}

TEST_CASE("reference probabilities target equal expected counts and cap at one") {
  StratumIndex s = two_strata(900, 100);
  ReferenceProbabilities rp = reference_probabilities(s, 200.0, 1000.0);
  // Target 100 per stratum: q0 = 100/900, q1 = 100/100 = 1 exactly.
  CHECK(rp.q[0] == doctest::Approx(100.0 / 900.0).epsilon(1e-14));
  CHECK(rp.q[1] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(rp.capped_count == 0);

  ReferenceProbabilities capped = reference_probabilities(s, 400.0, 1000.0);
  CHECK(capped.q[1] == 1.0);
  CHECK(capped.capped_count == 1);
  CHECK(capped.q[0] == doctest::Approx(200.0 / 900.0).epsilon(1e-14));

  CHECK_THROWS_WITH_AS(reference_probabilities(s, 0.0, 1000.0),
                       doctest::Contains("must be positive"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(reference_probabilities(s, 100.0, -1.0),
                       doctest::Contains("must be positive"), std::invalid_argument);
  StratumIndex empty;
  CHECK_THROWS_WITH_AS(reference_probabilities(empty, 10.0, 100.0),
                       doctest::Contains("empty stratum index"), std::invalid_argument);
}

TEST_CASE("stratum quantities map by key tuple, not by position") {
  StratumIndex source;
  source.keys = {{0.0, 1.0}, {1.0, 0.0}, {1.0, 1.0}};
  source.counts = {1, 1, 1};
  StratumIndex target;
  target.keys = {{1.0, 1.0}, {0.0, 1.0}};
  Eigen::VectorXd vals(3);
  vals << 10.0, 20.0, 30.0;
  Eigen::VectorXd mapped = map_stratum_quantity(source, vals, target);
  CHECK(mapped[0] == 30.0);
  CHECK(mapped[1] == 10.0);

  StratumIndex missing;
  missing.keys = {{9.0, 9.0}};
  CHECK_THROWS_WITH_AS(map_stratum_quantity(source, vals, missing),
                       doctest::Contains("stratum key missing in source"),
                       std::invalid_argument);
  Eigen::VectorXd wrong(2);
  wrong << 1.0, 2.0;
  CHECK_THROWS_WITH_AS(map_stratum_quantity(source, wrong, target),
                       doctest::Contains("values length mismatch"),
                       std::invalid_argument);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "tpwate/estimand.hpp"

using namespace tpwate;

namespace {
const std::vector<Estimand> kAll = {Estimand::ATE, Estimand::ATT, Estimand::ATC,
                                    Estimand::ATO};
}

TEST_CASE("weight values at the pinned points") {
  WeightValue ato = weight_value(Estimand::ATO, 0.5);
  CHECK(ato.w == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(ato.wdot == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));

  WeightValue att = weight_value(Estimand::ATT, 0.3);
  CHECK(att.w == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(att.wdot == doctest::Approx(1.0).epsilon(1e-15));

  WeightValue ate = weight_value(Estimand::ATE, 0.9);
  CHECK(ate.w == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ate.wdot == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));

  WeightValue atc = weight_value(Estimand::ATC, 0.25);
  CHECK(atc.w == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(atc.wdot == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("derivatives match central finite differences") {
  const double h = 1e-5;
  for (Estimand kind : kAll) {
    for (double e = 0.05; e < 0.951; e += 0.05) {
      auto w_at = [&](double x) { return weight_value(kind, x).w; };
      auto wdot_at = [&](double x) { return weight_value(kind, x).wdot; };
      double fd_w = oracle::central_diff(w_at, e, h);
      double fd_wdot = oracle::central_diff(wdot_at, e, h);
      WeightValue wv = weight_value(kind, e);
      CHECK(std::abs(fd_w - wv.wdot) < 1e-6);
      CHECK(std::abs(fd_wdot - wv.wddot) < 1e-5);
    }
  }
}

TEST_CASE("symmetry and mirror identities") {
  for (double e = 0.05; e < 0.951; e += 0.05) {
    CHECK(weight_value(Estimand::ATO, e).w ==
          doctest::Approx(weight_value(Estimand::ATO, 1.0 - e).w).epsilon(1e-14));
    CHECK(weight_value(Estimand::ATT, e).w ==
          doctest::Approx(weight_value(Estimand::ATC, 1.0 - e).w).epsilon(1e-14));
  }
}

TEST_CASE("double robustness holds exactly for the affine weights") {
  CHECK(supports_double_robustness(Estimand::ATE));
  CHECK(supports_double_robustness(Estimand::ATT));
  CHECK(supports_double_robustness(Estimand::ATC));
  CHECK_FALSE(supports_double_robustness(Estimand::ATO));
}

TEST_CASE("weights agree with an independently coded table") {
  for (Estimand kind : kAll)
    for (double e = 0.02; e < 0.99; e += 0.07) {
      WeightValue wv = weight_value(kind, e);
      int k = kind == Estimand::ATE   ? 0
              : kind == Estimand::ATT ? 1
              : kind == Estimand::ATC ? 2
                                      : 3;
      CHECK(wv.w == doctest::Approx(oracle::tilt_w(k, e)).epsilon(1e-15));
      CHECK(wv.wdot == doctest::Approx(oracle::tilt_wdot(k, e)).scale(1.0).epsilon(1e-15));
    }
}

TEST_CASE("boundary propensities are rejected") {
  for (Estimand kind : kAll) {
    CHECK_THROWS_AS(weight_value(kind, 0.0), std::domain_error);
    CHECK_THROWS_AS(weight_value(kind, 1.0), std::domain_error);
    CHECK_THROWS_AS(weight_value(kind, -0.1), std::domain_error);
    CHECK_THROWS_AS(weight_value(kind, 1.1), std::domain_error);
    CHECK_NOTHROW(weight_value(kind, 1e-9));
    CHECK_NOTHROW(weight_value(kind, 1.0 - 1e-9));
  }
}

TEST_CASE("name round trips and parse failures") {
  for (Estimand kind : kAll) CHECK(parse_estimand(estimand_name(kind)) == kind);
  CHECK(parse_estimand("ate") == Estimand::ATE);
  CHECK(parse_estimand("ato") == Estimand::ATO);
  CHECK_THROWS_AS(parse_estimand("ATE"), std::invalid_argument);
  CHECK_THROWS_AS(parse_estimand("average"), std::invalid_argument);
  CHECK_THROWS_AS(parse_estimand(""), std::invalid_argument);
}

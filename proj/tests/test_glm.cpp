#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "tpwate/glm.hpp"

using namespace tpwate;

namespace {

struct Instance {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  Eigen::VectorXd w;
};

Instance random_instance(int n, int p, std::uint64_t seed, bool unit_weights = false) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> norm(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (;;) {
    Instance inst;
    inst.x.resize(n, p);
    inst.x.col(0).setOnes();
    for (int j = 1; j < p; ++j)
      for (int i = 0; i < n; ++i) inst.x(i, j) = norm(gen);
    Eigen::VectorXd beta(p);
    for (int j = 0; j < p; ++j) beta[j] = 0.8 * norm(gen);
    inst.y.resize(n);
    inst.w.resize(n);
    int ones = 0;
    for (int i = 0; i < n; ++i) {
      double pr = oracle::expit(inst.x.row(i).dot(beta));
      inst.y[i] = unif(gen) < pr ? 1.0 : 0.0;
      ones += inst.y[i] == 1.0;
      inst.w[i] = unit_weights ? 1.0 : 0.2 + 2.8 * unif(gen);
    }
    if (ones >= 3 && ones <= n - 3) return inst;
  }
}

}  // namespace

TEST_CASE("intercept-only fits reproduce closed-form Bernoulli estimates") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(4, 1);
  Eigen::VectorXd w = Eigen::VectorXd::Ones(4);

  Eigen::VectorXd y_half(4);
  y_half << 0, 1, 0, 1;
  FittedGLM balanced = fit_weighted_logistic(x, y_half, w, {});
  CHECK(balanced.converged);
  CHECK(std::abs(balanced.coefficients[0]) < 1e-8);

  Eigen::VectorXd y34(4);
  y34 << 1, 1, 1, 0;
  FittedGLM three_quarters = fit_weighted_logistic(x, y34, w, {});
  CHECK(three_quarters.converged);
  CHECK(three_quarters.coefficients[0] ==
        doctest::Approx(std::log(3.0)).epsilon(1e-8));  // logit(0.75)

  Eigen::VectorXd w2(4);
  w2 << 2, 1, 1, 1;
  FittedGLM four_fifths = fit_weighted_logistic(x, y34, w2, {});
  CHECK(four_fifths.converged);
  CHECK(four_fifths.coefficients[0] ==
        doctest::Approx(std::log(4.0)).epsilon(1e-8));  // logit(0.8)
}

TEST_CASE("predictions are expit(x beta), bounded away from 0 and 1") {
  Eigen::VectorXd beta0(1);
  beta0 << 0.0;
  Eigen::MatrixXd any = Eigen::MatrixXd::Ones(3, 1);
  Eigen::VectorXd p = predict_probability(beta0, any);
  for (int i = 0; i < 3; ++i) CHECK(p[i] == doctest::Approx(0.5).epsilon(1e-15));

  Eigen::VectorXd huge(1);
  huge << 1e6;
  Eigen::MatrixXd signs(2, 1);
  signs << 1.0, -1.0;
  Eigen::VectorXd sat = predict_probability(huge, signs);
  CHECK(std::isfinite(sat[0]));
  CHECK(std::isfinite(sat[1]));
  CHECK(sat[0] > 0.0);
  CHECK(sat[0] < 1.0);
  CHECK(sat[1] > 0.0);
  CHECK(sat[1] < 1.0);

  Eigen::VectorXd beta2(2);
  beta2 << 0.5, -1.0;
  CHECK_THROWS_AS(predict_probability(beta2, any), std::invalid_argument);
}

TEST_CASE("score and Hessian at pinned points") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(2, 1);
  Eigen::VectorXd y(2);
  y << 0, 1;
  Eigen::VectorXd w = Eigen::VectorXd::Ones(2);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(1);

  Eigen::VectorXd score;
  Eigen::MatrixXd hess;
  score_and_hessian(beta, x, y, w, &score, &hess);
  CHECK(std::abs(score[0]) < 1e-15);
  CHECK(hess(0, 0) == doctest::Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("score vanishes at the fitted coefficients") {
  Instance inst = random_instance(60, 3, 77);
  FittedGLM fit = fit_weighted_logistic(inst.x, inst.y, inst.w, {});
  REQUIRE(fit.converged);
  Eigen::VectorXd score;
  score_and_hessian(fit.coefficients, inst.x, inst.y, inst.w, &score, nullptr);
  CHECK(score.lpNorm<Eigen::Infinity>() < 1e-8);
  CHECK(fit.final_score_norm < 1e-8);
}

TEST_CASE("analytic score and Hessian match finite differences") {
  for (std::uint64_t seed : {11ULL, 12ULL, 13ULL}) {
    Instance inst = random_instance(40, 4, seed);
    std::mt19937_64 gen(seed + 100);
    std::normal_distribution<double> norm(0.0, 0.5);
    Eigen::VectorXd beta(4);
    for (int j = 0; j < 4; ++j) beta[j] = norm(gen);

    Eigen::VectorXd score;
    Eigen::MatrixXd hess;
    score_and_hessian(beta, inst.x, inst.y, inst.w, &score, &hess);

    const double h = 1e-5;
    for (int j = 0; j < 4; ++j) {
      auto ll_j = [&](double bj) {
        Eigen::VectorXd b = beta;
        b[j] = bj;
        return weighted_loglik(b, inst.x, inst.y, inst.w);
      };
      CHECK(std::abs(oracle::central_diff(ll_j, beta[j], h) - score[j]) < 1e-6);
      // Independent likelihood form agrees as well.
      auto ll_alt = [&](double bj) {
        Eigen::VectorXd b = beta;
        b[j] = bj;
        return oracle::bernoulli_loglik(b, inst.x, inst.y, inst.w);
      };
      CHECK(std::abs(oracle::central_diff(ll_alt, beta[j], h) - score[j]) < 1e-6);
      for (int l = 0; l < 4; ++l) {
        auto score_l = [&](double bj) {
          Eigen::VectorXd b = beta;
          b[j] = bj;
          Eigen::VectorXd s;
          score_and_hessian(b, inst.x, inst.y, inst.w, &s, nullptr);
          return s[l];
        };
        CHECK(std::abs(oracle::central_diff(score_l, beta[j], h) - hess(l, j)) < 1e-5);
      }
    }
  }
}

TEST_CASE("fit is invariant to rescaling all weights") {
  Instance inst = random_instance(50, 3, 21);
  FittedGLM base = fit_weighted_logistic(inst.x, inst.y, inst.w, {});
  FittedGLM scaled = fit_weighted_logistic(inst.x, inst.y, 7.3 * inst.w, {});
  REQUIRE(base.converged);
  REQUIRE(scaled.converged);
  CHECK((base.coefficients - scaled.coefficients).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("weighted fits agree with an independent IRLS solver") {
  std::mt19937_64 meta(5);
  for (int trial = 0; trial < 30; ++trial) {
    int n = 30 + static_cast<int>(meta() % 51);
    int p = 1 + static_cast<int>(meta() % 4);
    Instance inst = random_instance(n, p, 1000 + trial);
    FittedGLM fit = fit_weighted_logistic(inst.x, inst.y, inst.w, {});
    REQUIRE(fit.converged);
    oracle::LogisticFit ref = oracle::irls_logistic(inst.x, inst.y, inst.w);
    REQUIRE(ref.converged);
    CHECK((fit.coefficients - ref.beta).lpNorm<Eigen::Infinity>() < 1e-8);
  }
}

TEST_CASE("unweighted single-phase fit matches the unweighted MLE oracle") {
  Instance inst = random_instance(70, 4, 404, true);
  FittedGLM fit = fit_weighted_logistic(inst.x, inst.y, inst.w, {});
  oracle::LogisticFit ref = oracle::irls_logistic(inst.x, inst.y, inst.w);
  REQUIRE(fit.converged);
  REQUIRE(ref.converged);
  CHECK((fit.coefficients - ref.beta).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("row masks and zero weights drop rows equivalently") {
  Instance inst = random_instance(64, 3, 31);
  std::vector<char> mask(64, 1);
  std::vector<int> kept;
  for (int i = 0; i < 64; ++i) {
    if (i % 4 == 0) mask[static_cast<std::size_t>(i)] = 0;
    else kept.push_back(i);
  }

  FittedGLM masked = fit_weighted_logistic(inst.x, inst.y, inst.w, mask);

  Eigen::MatrixXd xs(static_cast<Eigen::Index>(kept.size()), 3);
  Eigen::VectorXd ys(static_cast<Eigen::Index>(kept.size()));
  Eigen::VectorXd ws(static_cast<Eigen::Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) {
    xs.row(static_cast<Eigen::Index>(j)) = inst.x.row(kept[j]);
    ys[static_cast<Eigen::Index>(j)] = inst.y[kept[j]];
    ws[static_cast<Eigen::Index>(j)] = inst.w[kept[j]];
  }
  FittedGLM direct = fit_weighted_logistic(xs, ys, ws, {});
  CHECK((masked.coefficients - direct.coefficients).lpNorm<Eigen::Infinity>() < 1e-10);

  Eigen::VectorXd wz = inst.w;
  for (int i = 0; i < 64; ++i)
    if (i % 4 == 0) wz[i] = 0.0;
  FittedGLM zeroed = fit_weighted_logistic(inst.x, inst.y, wz, {});
  CHECK((zeroed.coefficients - direct.coefficients).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("degenerate responses are rejected") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(4, 1);
  Eigen::VectorXd w = Eigen::VectorXd::Ones(4);

  Eigen::VectorXd all1 = Eigen::VectorXd::Ones(4);
  CHECK_THROWS_WITH_AS(fit_weighted_logistic(x, all1, w, {}),
                       doctest::Contains("both response classes"),
                       std::invalid_argument);

  Eigen::VectorXd frac(4);
  frac << 0, 1, 0.5, 1;
  CHECK_THROWS_WITH_AS(fit_weighted_logistic(x, frac, w, {}),
                       doctest::Contains("must be 0/1"), std::invalid_argument);

  // Masking away the only zero response leaves one class.
  Eigen::VectorXd y(4);
  y << 0, 1, 1, 1;
  std::vector<char> mask = {0, 1, 1, 1};
  CHECK_THROWS_AS(fit_weighted_logistic(x, y, w, mask), std::invalid_argument);

  std::vector<char> none(4, 0);
  CHECK_THROWS_WITH_AS(fit_weighted_logistic(x, y, w, none),
                       doctest::Contains("no usable rows"), std::invalid_argument);
}

TEST_CASE("complete separation ends in an error or a flagged non-convergence") {
  // x perfectly predicts y, so the MLE is at infinity.
  Eigen::MatrixXd x(6, 2);
  x << 1, -2, 1, -1.5, 1, -1, 1, 1, 1, 1.5, 1, 2;
  Eigen::VectorXd y(6);
  y << 0, 0, 0, 1, 1, 1;
  Eigen::VectorXd w = Eigen::VectorXd::Ones(6);
  try {
    FittedGLM fit = fit_weighted_logistic(x, y, w, {});
    CHECK_FALSE(fit.converged);
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("diverged") != std::string::npos);
  }
}

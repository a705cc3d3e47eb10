#include "tpwate/glm.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace tpwate {

namespace {

// Gather the masked-in rows with positive weight into dense arrays.
struct Working {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  Eigen::VectorXd w;
};

Working gather(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
               const Eigen::VectorXd& weights, const std::vector<char>& row_mask) {
  const Eigen::Index n = x.rows();
  if (y.size() != n || weights.size() != n)
    throw std::invalid_argument("fit_weighted_logistic: length mismatch");
  if (!row_mask.empty() && static_cast<Eigen::Index>(row_mask.size()) != n)
    throw std::invalid_argument("fit_weighted_logistic: mask length mismatch");
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < n; ++i) {
    bool in = row_mask.empty() || row_mask[static_cast<std::size_t>(i)];
    if (in && weights[i] > 0.0) keep.push_back(i);
  }
  Working wk;
  wk.x.resize(static_cast<Eigen::Index>(keep.size()), x.cols());
  wk.y.resize(static_cast<Eigen::Index>(keep.size()));
  wk.w.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    wk.x.row(static_cast<Eigen::Index>(i)) = x.row(keep[i]);
    wk.y[static_cast<Eigen::Index>(i)] = y[keep[i]];
    wk.w[static_cast<Eigen::Index>(i)] = weights[keep[i]];
  }
  return wk;
}

}  // namespace

double weighted_loglik(const Eigen::VectorXd& beta, const Eigen::MatrixXd& x,
                       const Eigen::VectorXd& y, const Eigen::VectorXd& weights) {
  Eigen::VectorXd eta = x * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    ll += weights[i] * (y[i] * eta[i] - softplus(eta[i]));
  return ll;
}

void score_and_hessian(const Eigen::VectorXd& beta, const Eigen::MatrixXd& x,
                       const Eigen::VectorXd& y, const Eigen::VectorXd& weights,
                       Eigen::VectorXd* score, Eigen::MatrixXd* hessian) {
  if (x.cols() != beta.size())
    throw std::invalid_argument("score_and_hessian: dimension mismatch");
  Eigen::VectorXd eta = x * beta;
  Eigen::VectorXd p(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) p[i] = expit(eta[i]);
  if (score) *score = x.transpose() * (weights.array() * (y - p).array()).matrix();
  if (hessian) {
    Eigen::VectorXd d = (weights.array() * p.array() * (1.0 - p.array())).matrix();
    *hessian = -(x.transpose() * d.asDiagonal() * x);
  }
}

FittedGLM fit_weighted_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& weights,
                                const std::vector<char>& row_mask) {
  Working wk = gather(x, y, weights, row_mask);
  const Eigen::Index p = x.cols();
  if (wk.x.rows() < 1) throw std::invalid_argument("no usable rows for logistic fit");

  bool has0 = false, has1 = false;
  for (Eigen::Index i = 0; i < wk.y.size(); ++i) {
    if (wk.y[i] == 0.0) has0 = true;
    else if (wk.y[i] == 1.0) has1 = true;
    else throw std::invalid_argument("logistic response must be 0/1");
  }
  if (!has0 || !has1)
    throw std::invalid_argument("logistic fit needs both response classes among weighted rows");

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double ll = weighted_loglik(beta, wk.x, wk.y, wk.w);

  FittedGLM model;
  const double tol = 1e-8;
  const int max_iter = 100;
  Eigen::VectorXd score(p);
  Eigen::MatrixXd hess(p, p);
  for (int it = 0; it < max_iter; ++it) {
    score_and_hessian(beta, wk.x, wk.y, wk.w, &score, &hess);
    model.iterations = it;
    model.final_score_norm = score.lpNorm<Eigen::Infinity>();
    if (model.final_score_norm < tol) {
      model.converged = true;
      break;
    }

    Eigen::MatrixXd neg_h = -hess;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(neg_h);
    double lmax = es.eigenvalues().maxCoeff();
    double lmin = es.eigenvalues().minCoeff();
    if (!(lmax > 0.0)) throw std::runtime_error("singular Hessian in logistic fit");
    if (lmin <= lmax / 1e12) {
      neg_h.diagonal().array() += 1e-8;
      es.compute(neg_h);
      if (es.eigenvalues().minCoeff() <= 0.0)
        throw std::runtime_error("singular Hessian in logistic fit");
    }
    Eigen::VectorXd step = neg_h.ldlt().solve(score);
    if (!step.allFinite()) throw std::runtime_error("singular Hessian in logistic fit");

    // Step halving: accept the first step size that does not decrease the
    // weighted log-likelihood beyond rounding noise.  Near the optimum the
    // true improvement per step falls below the precision of the computed
    // log-likelihood, so an exact non-decrease test would stall the
    // iteration short of the score tolerance.
    const double accept_tol = 1e-10 * (1.0 + std::abs(ll));
    double scale = 1.0;
    Eigen::VectorXd cand;
    double ll_new = -std::numeric_limits<double>::infinity();
    for (int h = 0; h <= 30; ++h) {
      cand = beta + scale * step;
      ll_new = weighted_loglik(cand, wk.x, wk.y, wk.w);
      if (ll_new >= ll - accept_tol) break;
      scale *= 0.5;
    }
    beta = cand;
    ll = ll_new;
    if (beta.norm() > 1e6)
      throw std::runtime_error("logistic fit diverged (complete separation?)");
  }
  if (!model.converged) {
    score_and_hessian(beta, wk.x, wk.y, wk.w, &score, nullptr);
    model.final_score_norm = score.lpNorm<Eigen::Infinity>();
    model.converged = model.final_score_norm < tol;
    model.iterations = max_iter;
  }
  if (model.converged) {
    // A finite maximizer cannot strictly classify every weighted row: if it
    // did, the fitted direction would separate the classes and the
    // likelihood would be unbounded along it.  Meeting the score tolerance
    // in that situation only means the probabilities saturated, so report
    // the fit as non-converged.
    Eigen::VectorXd eta = wk.x * beta;
    bool strictly_separated = true;
    for (Eigen::Index i = 0; i < eta.size() && strictly_separated; ++i)
      strictly_separated = wk.y[i] == 1.0 ? eta[i] > 0.0 : eta[i] < 0.0;
    if (strictly_separated) model.converged = false;
  }
  model.coefficients = beta;
  return model;
}

Eigen::VectorXd predict_probability(const Eigen::VectorXd& beta, const Eigen::MatrixXd& x) {
  if (x.cols() != beta.size())
    throw std::invalid_argument("predict_probability: dimension mismatch");
  const double lo = std::numeric_limits<double>::min();
  const double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  Eigen::VectorXd eta = x * beta;
  Eigen::VectorXd p(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    p[i] = std::min(hi, std::max(lo, expit(eta[i])));
  return p;
}

Eigen::VectorXd predict_probability(const FittedGLM& model, const Eigen::MatrixXd& x) {
  return predict_probability(model.coefficients, x);
}

}  // namespace tpwate

#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace tpwate {

// Numerically stable expit and log(1+exp(x)).
inline double expit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

struct FittedGLM {
  Eigen::VectorXd coefficients;  // intercept first
  std::vector<std::string> design_columns;
  bool converged = false;
  int iterations = 0;
  double final_score_norm = 0.0;
};

// Weighted logistic regression by Newton-Raphson with step halving.
// Rows with mask=0 (or nonpositive weight) are excluded entirely; the
// remaining rows must contain both response classes.
FittedGLM fit_weighted_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& weights,
                                const std::vector<char>& row_mask = {});

// expit(x beta) per row, clamped away from exact 0/1.
Eigen::VectorXd predict_probability(const FittedGLM& model, const Eigen::MatrixXd& x);
Eigen::VectorXd predict_probability(const Eigen::VectorXd& beta, const Eigen::MatrixXd& x);

// Weighted score sum_i w_i x_i (y_i - p_i) and Hessian -sum_i w_i p_i(1-p_i) x_i x_i^T
// at the supplied coefficients.
void score_and_hessian(const Eigen::VectorXd& beta, const Eigen::MatrixXd& x,
                       const Eigen::VectorXd& y, const Eigen::VectorXd& weights,
                       Eigen::VectorXd* score, Eigen::MatrixXd* hessian);

double weighted_loglik(const Eigen::VectorXd& beta, const Eigen::MatrixXd& x,
                       const Eigen::VectorXd& y, const Eigen::VectorXd& weights);

}  // namespace tpwate

#include "tpwate/design.hpp"

#include <cmath>
#include <stdexcept>

namespace tpwate {

namespace {

void check_input(const DesignInput& in) {
  if (in.p.size() != in.sigma.size() || in.p.size() == 0)
    throw std::invalid_argument("design input: p and sigma must have equal nonzero length");
  if (std::abs(in.p.sum() - 1.0) > 1e-8)
    throw std::invalid_argument("design input: stratum shares must sum to 1");
  if ((in.sigma.array() < 0.0).any())
    throw std::invalid_argument("design input: sigma must be nonnegative");
  if (!(in.qbar > 0.0 && in.qbar < 1.0))
    throw std::invalid_argument("design input: qbar must lie in (0,1)");
}

// Allocation proportional to sqrt(c_k) under the budget sum p_k q_k = qbar,
// minimizing sum_k p_k c_k / q_k.
DesignOutput allocate(const Eigen::VectorXd& p, const Eigen::VectorXd& c, double qbar) {
  const Eigen::Index K = p.size();
  Eigen::VectorXd root = c.array().sqrt();
  double denom = (p.array() * root.array()).sum();
  if (denom == 0.0) throw std::invalid_argument("allocation undefined: all c_k are zero");
  DesignOutput out;
  out.q = qbar / denom * root;
  out.max_q = out.q.maxCoeff();
  out.feasible = out.max_q <= 1.0 + 1e-12;
  out.objective = denom * denom / qbar;
  out.objective_proportional = (p.array() * c.array()).sum() / qbar;
  (void)K;
  return out;
}

}  // namespace

DesignOutput neyman_allocation(const DesignInput& input) {
  check_input(input);
  return allocate(input.p, input.sigma.array().square(), input.qbar);
}

DesignOutput ipsw_allocation(const DesignInput& input) {
  check_input(input);
  if (!input.has_xi())
    throw std::invalid_argument("ipsw_allocation: xi (conditional means) required");
  Eigen::VectorXd c = input.sigma.array().square() + input.xi.array().square();
  return allocate(input.p, c, input.qbar);
}

Eigen::VectorXd simple_design_scores(Estimand estimand,
                                     const Eigen::VectorXd& e_by_stratum) {
  Eigen::VectorXd out(e_by_stratum.size());
  for (Eigen::Index k = 0; k < e_by_stratum.size(); ++k) {
    double e = e_by_stratum[k];
    WeightValue wv = weight_value(estimand, e);  // throws on boundary e
    out[k] = wv.w / std::sqrt(e * (1.0 - e));
  }
  return out;
}

namespace {

struct StratumMoments {
  Eigen::VectorXd share;  // N_k / N
  Eigen::VectorXd mean;   // per-stratum mean of phi
  Eigen::VectorXd var;    // per-stratum variance (divisor N_k)
  double grand_mean = 0.0;
};

StratumMoments moments(const Eigen::VectorXd& phi, const std::vector<int>& stratum_of,
                       Eigen::Index K) {
  if (static_cast<Eigen::Index>(stratum_of.size()) != phi.size())
    throw std::invalid_argument("stratum labels do not match phi length");
  Eigen::VectorXd cnt = Eigen::VectorXd::Zero(K), sum = Eigen::VectorXd::Zero(K);
  for (Eigen::Index i = 0; i < phi.size(); ++i) {
    int k = stratum_of[static_cast<std::size_t>(i)];
    if (k < 0 || k >= K) throw std::invalid_argument("stratum label out of range");
    cnt[k] += 1.0;
    sum[k] += phi[i];
  }
  StratumMoments m;
  m.share.resize(K);
  m.mean.resize(K);
  m.var.setZero(K);
  const double n = static_cast<double>(phi.size());
  for (Eigen::Index k = 0; k < K; ++k) {
    if (cnt[k] == 0.0) throw std::invalid_argument("empty stratum " + std::to_string(k));
    m.share[k] = cnt[k] / n;
    m.mean[k] = sum[k] / cnt[k];
  }
  // Second pass keeps the within-stratum variances free of cancellation.
  for (Eigen::Index i = 0; i < phi.size(); ++i) {
    int k = stratum_of[static_cast<std::size_t>(i)];
    double d = phi[i] - m.mean[k];
    m.var[k] += d * d;
  }
  for (Eigen::Index k = 0; k < K; ++k) m.var[k] /= cnt[k];
  m.grand_mean = phi.mean();
  return m;
}

}  // namespace

BoundReport efficiency_bound(const Eigen::VectorXd& phi, const std::vector<int>& stratum_of,
                             const Eigen::VectorXd& q_by_stratum) {
  const Eigen::Index K = q_by_stratum.size();
  StratumMoments m = moments(phi, stratum_of, K);
  double var_between = 0.0, term_within_over_q = 0.0, var_total = 0.0,
         term_within_excess = 0.0;
  for (Eigen::Index k = 0; k < K; ++k) {
    double d = m.mean[k] - m.grand_mean;
    var_between += m.share[k] * d * d;
    term_within_over_q += m.share[k] * m.var[k] / q_by_stratum[k];
    term_within_excess += m.share[k] * (1.0 / q_by_stratum[k] - 1.0) * m.var[k];
  }
  var_total = (phi.array() - m.grand_mean).square().sum() / static_cast<double>(phi.size());
  BoundReport r;
  r.v_w = var_between + term_within_over_q;
  r.v_w_alt = var_total + term_within_excess;
  return r;
}

double enrichment_gain(const Eigen::VectorXd& phi, const std::vector<int>& stratum_of,
                       const Eigen::VectorXd& q_by_stratum) {
  const Eigen::Index K = q_by_stratum.size();
  StratumMoments m = moments(phi, stratum_of, K);
  double g = 0.0;
  for (Eigen::Index k = 0; k < K; ++k)
    g += m.share[k] * (1.0 / q_by_stratum[k] - 1.0) * m.mean[k] * m.mean[k];
  return g;
}

}  // namespace tpwate

#include "tpwate/twophase.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "tpwate/rng.hpp"

namespace tpwate {

namespace {
constexpr std::uint64_t kPoissonTag = 0x706f6973ULL;  // "pois"
constexpr std::uint64_t kSrsworTag = 0x73727377ULL;   // "srsw"
}  // namespace

std::pair<Eigen::VectorXi, Eigen::VectorXd> poisson_sample(
    const StratumIndex& strata, const Eigen::VectorXd& q_by_stratum, std::uint64_t seed) {
  if (q_by_stratum.size() != strata.K())
    throw std::invalid_argument("poisson_sample: need one probability per stratum");
  for (Eigen::Index k = 0; k < q_by_stratum.size(); ++k)
    if (!(q_by_stratum[k] > 0.0) || q_by_stratum[k] > 1.0)
      throw std::invalid_argument("poisson_sample: q out of (0,1] for stratum " +
                                  std::to_string(k));
  const Eigen::Index n = static_cast<Eigen::Index>(strata.labels.size());
  Eigen::VectorXi delta(n);
  Eigen::VectorXd q(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    int k = strata.labels[static_cast<std::size_t>(i)];
    double qk = q_by_stratum[k];
    double u = keyed_uniform(seed, kPoissonTag, static_cast<std::uint64_t>(k),
                             static_cast<std::uint64_t>(i));
    delta[i] = u < qk ? 1 : 0;
    q[i] = qk;
  }
  return {delta, q};
}

std::pair<Eigen::VectorXi, Eigen::VectorXd> srswor_sample(
    const StratumIndex& strata, const Eigen::VectorXi& m_by_stratum, std::uint64_t seed) {
  const int K = strata.K();
  if (m_by_stratum.size() != K)
    throw std::invalid_argument("srswor_sample: need one target count per stratum");
  for (int k = 0; k < K; ++k)
    if (m_by_stratum[k] < 0 || m_by_stratum[k] > strata.counts[k])
      throw std::invalid_argument("srswor_sample: m_k out of [0, n_k] for stratum " +
                                  std::to_string(k));
  const Eigen::Index n = static_cast<Eigen::Index>(strata.labels.size());
  Eigen::VectorXi delta = Eigen::VectorXi::Zero(n);
  Eigen::VectorXd q(n);

  // Selecting the m_k smallest keyed-hash scores within a stratum draws a
  // uniform random subset without replacement, independent of row order.
  std::vector<std::vector<std::pair<std::uint64_t, Eigen::Index>>> scored(K);
  for (int k = 0; k < K; ++k) scored[k].reserve(strata.counts[k]);
  for (Eigen::Index i = 0; i < n; ++i) {
    int k = strata.labels[static_cast<std::size_t>(i)];
    std::uint64_t score = hash_key(seed, kSrsworTag, static_cast<std::uint64_t>(k),
                                   static_cast<std::uint64_t>(i));
    scored[k].emplace_back(score, i);
    q[i] = static_cast<double>(m_by_stratum[k]) / static_cast<double>(strata.counts[k]);
  }
  for (int k = 0; k < K; ++k) {
    auto& rows = scored[k];
    const int mk = m_by_stratum[k];
    std::partial_sort(rows.begin(), rows.begin() + mk, rows.end());
    for (int j = 0; j < mk; ++j) delta[rows[static_cast<std::size_t>(j)].second] = 1;
  }
  return {delta, q};
}

ReferenceProbabilities reference_probabilities(const StratumIndex& reference_strata,
                                               double m, double n) {
  const int K = reference_strata.K();
  if (K == 0) throw std::invalid_argument("reference_probabilities: empty stratum index");
  if (!(m > 0.0) || !(n > 0.0))
    throw std::invalid_argument("reference_probabilities: m and n must be positive");
  ReferenceProbabilities out;
  out.q.resize(K);
  const double target = m / static_cast<double>(K);
  for (int k = 0; k < K; ++k) {
    if (reference_strata.counts[k] == 0)
      throw std::invalid_argument("reference_probabilities: empty reference stratum " +
                                  std::to_string(k));
    double qk = target / (n * reference_strata.shares[k]);
    if (qk > 1.0) {
      qk = 1.0;
      ++out.capped_count;
    }
    out.q[k] = qk;
  }
  return out;
}

Eigen::VectorXd map_stratum_quantity(const StratumIndex& source,
                                     const Eigen::VectorXd& values,
                                     const StratumIndex& target) {
  if (values.size() != source.K())
    throw std::invalid_argument("map_stratum_quantity: values length mismatch");
  Eigen::VectorXd out(target.K());
  for (int k = 0; k < target.K(); ++k) {
    const auto& key = target.keys[static_cast<std::size_t>(k)];
    bool found = false;
    for (int j = 0; j < source.K(); ++j)
      if (source.keys[static_cast<std::size_t>(j)] == key) {
        out[k] = values[j];
        found = true;
        break;
      }
    if (!found)
      throw std::invalid_argument("map_stratum_quantity: stratum key missing in source");
  }
  return out;
}

}  // namespace tpwate

#include "tpwate/jackknife.hpp"

#include <stdexcept>
#include <string>

#include "tpwate/rng.hpp"

namespace tpwate {

JackknifePlan partition_stratified(Eigen::Index n, const Eigen::VectorXi& delta, int D,
                                   std::uint64_t seed) {
  if (delta.size() != n) throw std::invalid_argument("partition_stratified: length mismatch");
  if (D < 2) throw std::invalid_argument("partition_stratified: D must be >= 2");
  std::vector<int> ph1, ph0;
  for (Eigen::Index i = 0; i < n; ++i)
    (delta[i] == 1 ? ph1 : ph0).push_back(static_cast<int>(i));
  if (!ph1.empty() && !ph0.empty()) {
    if (static_cast<std::size_t>(D) > std::min(ph1.size(), ph0.size()))
      throw std::invalid_argument("partition_stratified: D exceeds a phase count");
  } else if (static_cast<Eigen::Index>(D) > n) {
    throw std::invalid_argument("partition_stratified: D exceeds n");
  }

  JackknifePlan plan;
  plan.D = D;
  plan.seed = seed;
  plan.group_of.assign(static_cast<std::size_t>(n), -1);
  Rng rng(seed);
  std::size_t offset = 0;
  for (auto* phase : {&ph1, &ph0}) {
    rng.shuffle(phase->data(), phase->size());
    for (std::size_t i = 0; i < phase->size(); ++i)
      plan.group_of[static_cast<std::size_t>((*phase)[i])] =
          static_cast<int>((offset + i) % static_cast<std::size_t>(D));
    offset = (offset + phase->size()) % static_cast<std::size_t>(D);
  }
  return plan;
}

std::vector<JackknifeResult> jackknife_correct_multi(
    const std::function<std::vector<double>(const ObservationTable&)>& fn,
    const ObservationTable& table, const JackknifePlan& plan) {
  if (static_cast<Eigen::Index>(plan.group_of.size()) != table.n())
    throw std::invalid_argument("jackknife plan does not match table");
  std::vector<double> full = fn(table);
  const std::size_t nstat = full.size();
  std::vector<JackknifeResult> out(nstat);
  for (std::size_t s = 0; s < nstat; ++s) {
    out[s].full = full[s];
    out[s].replicates.reserve(static_cast<std::size_t>(plan.D));
  }
  std::vector<double> repl_mean(nstat, 0.0);
  for (int g = 0; g < plan.D; ++g) {
    std::vector<int> keep;
    keep.reserve(plan.group_of.size());
    for (std::size_t i = 0; i < plan.group_of.size(); ++i)
      if (plan.group_of[i] != g) keep.push_back(static_cast<int>(i));
    std::vector<double> rep;
    try {
      rep = fn(table.subset(keep));
    } catch (const std::exception& e) {
      throw std::runtime_error("jackknife replicate " + std::to_string(g) +
                               " failed: " + e.what());
    }
    if (rep.size() != nstat)
      throw std::runtime_error("jackknife closure returned inconsistent statistic count");
    for (std::size_t s = 0; s < nstat; ++s) {
      out[s].replicates.push_back(rep[s]);
      repl_mean[s] += rep[s];
    }
  }
  for (std::size_t s = 0; s < nstat; ++s) {
    repl_mean[s] /= static_cast<double>(plan.D);
    out[s].corrected = plan.D * out[s].full - (plan.D - 1) * repl_mean[s];
  }
  return out;
}

JackknifeResult jackknife_correct(const std::function<double(const ObservationTable&)>& fn,
                                  const ObservationTable& table, const JackknifePlan& plan) {
  auto multi = jackknife_correct_multi(
      [&fn](const ObservationTable& t) { return std::vector<double>{fn(t)}; }, table, plan);
  return multi[0];
}

}  // namespace tpwate

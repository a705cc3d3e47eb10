#include "tpwate/simstudy.hpp"

#include <atomic>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "tpwate/estimators.hpp"
#include "tpwate/inference.hpp"
#include "tpwate/jackknife.hpp"
#include "tpwate/rng.hpp"

namespace tpwate {

namespace {

const double kNan = std::numeric_limits<double>::quiet_NaN();

// Seed-derivation layers keeping the replication, reference, sampling, and
// jackknife streams disjoint.
enum : std::uint64_t { kRepLayer = 1, kRefLayer = 2, kSampleLayer = 3, kJackLayer = 4 };

struct DrawnRow {
  double v[8];
  double w;
  double e;
  int a, y1, y0;
};

DrawnRow draw_row(Rng& rng) {
  DrawnRow d;
  for (int j = 0; j < 8; ++j) d.v[j] = rng.uniform() < 0.5 ? 1.0 : 0.0;
  d.w = -1.0 + 0.5 * (d.v[0] + d.v[2] + d.v[3] + d.v[6]) + rng.normal(0.0, 0.25);
  d.e = expit(-2.10 + 0.5 * (d.v[0] + d.v[1] + d.v[3] + d.v[5]) + d.w);
  d.a = rng.uniform() < d.e ? 1 : 0;
  double p1 = expit(-0.59 + 0.5 * (d.v[0] + d.v[1] + d.v[2] + d.v[4]) + 1.5 * d.w);
  double p0 = expit(-1.41 + d.w);
  d.y1 = rng.uniform() < p1 ? 1 : 0;
  d.y0 = rng.uniform() < p0 ? 1 : 0;
  return d;
}

const Estimand kAllEstimands[4] = {Estimand::ATE, Estimand::ATT, Estimand::ATC,
                                   Estimand::ATO};

}  // namespace

Population generate_population(Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("generate_population: n must be >= 1");
  Population pop;
  pop.a.resize(n);
  pop.v.resize(n, 8);
  pop.w.resize(n);
  pop.y1.resize(n);
  pop.y0.resize(n);
  pop.y.resize(n);
  pop.e_true.resize(n);
  Rng rng(seed);
  for (Eigen::Index i = 0; i < n; ++i) {
    DrawnRow d = draw_row(rng);
    for (int j = 0; j < 8; ++j) pop.v(i, j) = d.v[j];
    pop.w[i] = d.w;
    pop.e_true[i] = d.e;
    pop.a[i] = d.a;
    pop.y1[i] = d.y1;
    pop.y0[i] = d.y0;
    pop.y[i] = d.a == 1 ? d.y1 : d.y0;
  }
  return pop;
}

ObservationTable population_table(const Population& pop) {
  ObservationTable t;
  t.a = pop.a;
  t.y = pop.y;
  t.v = pop.v;
  t.w = pop.w;
  t.delta = Eigen::VectorXi::Ones(pop.n());
  t.q = Eigen::VectorXd::Ones(pop.n());
  t.v_names = {"V1", "V2", "V3", "V4", "V5", "V6", "V7", "V8"};
  t.w_names = {"W"};
  t.treat_name = "A";
  t.outcome_name = "Y";
  t.check();
  return t;
}

ReferenceSummary reference_summary(long long n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("reference_summary: n must be >= 1");
  ReferenceSummary s;
  s.n = n;
  double sw[4] = {0, 0, 0, 0}, swt[4] = {0, 0, 0, 0};
  long long a_sum = 0;
  Rng rng(seed);
  for (long long i = 0; i < n; ++i) {
    DrawnRow d = draw_row(rng);
    a_sum += d.a;
    double diff = d.y1 - d.y0;
    for (int k = 0; k < 4; ++k) {
      WeightValue wv = weight_value(kAllEstimands[k], d.e);
      sw[k] += wv.w;
      swt[k] += wv.w * diff;
    }
    int y = d.a == 1 ? d.y1 : d.y0;
    for (int j = 0; j < 8; ++j)
      ++s.counts[j][d.a][d.v[j] > 0.5 ? 1 : 0][y];
  }
  s.prevalence = static_cast<double>(a_sum) / static_cast<double>(n);
  for (int k = 0; k < 4; ++k) s.truths[k] = swt[k] / sw[k];
  return s;
}

double true_value(const ReferenceSummary& s, Estimand estimand) {
  return s.truths[static_cast<int>(estimand)];
}

ReferenceDesign reference_design(const ReferenceSummary& s, bool ods, int v_obs, double m,
                                 double n_phase1) {
  if (v_obs < 1 || v_obs > 8)
    throw std::invalid_argument("reference_design: v_obs must be in 1..8");
  if (!(m > 0.0) || !(n_phase1 > 0.0))
    throw std::invalid_argument("reference_design: m and n must be positive");
  const int j = v_obs - 1;
  ReferenceDesign rd;
  std::vector<double> shares;
  // Lexicographic key order (a, v[, y]) matches build_strata labeling.
  for (int a = 0; a < 2; ++a)
    for (int v = 0; v < 2; ++v) {
      if (ods) {
        for (int y = 0; y < 2; ++y) {
          rd.keys.push_back({static_cast<double>(a), static_cast<double>(v),
                             static_cast<double>(y)});
          shares.push_back(static_cast<double>(s.counts[j][a][v][y]) /
                           static_cast<double>(s.n));
        }
      } else {
        rd.keys.push_back({static_cast<double>(a), static_cast<double>(v)});
        shares.push_back(static_cast<double>(s.counts[j][a][v][0] + s.counts[j][a][v][1]) /
                         static_cast<double>(s.n));
      }
    }
  const int K = static_cast<int>(rd.keys.size());
  rd.q.resize(K);
  const double target = m / static_cast<double>(K);
  for (int k = 0; k < K; ++k) {
    if (shares[static_cast<std::size_t>(k)] <= 0.0)
      throw std::invalid_argument("reference_design: empty reference stratum " +
                                  std::to_string(k));
    double qk = target / (n_phase1 * shares[static_cast<std::size_t>(k)]);
    if (qk > 1.0) {
      qk = 1.0;
      ++rd.capped_count;
    }
    rd.q[k] = qk;
  }
  return rd;
}

Eigen::VectorXd align_reference_q(const ReferenceDesign& rd, const StratumIndex& target) {
  Eigen::VectorXd out(target.K());
  for (int k = 0; k < target.K(); ++k) {
    const auto& key = target.keys[static_cast<std::size_t>(k)];
    bool found = false;
    for (std::size_t jj = 0; jj < rd.keys.size(); ++jj)
      if (rd.keys[jj] == key) {
        out[k] = rd.q[static_cast<Eigen::Index>(jj)];
        found = true;
        break;
      }
    if (!found)
      throw std::runtime_error("align_reference_q: realized stratum missing from reference");
  }
  return out;
}

Eigen::VectorXi equal_allocation(int m, int K) {
  if (K < 1 || m < 0) throw std::invalid_argument("equal_allocation: bad arguments");
  Eigen::VectorXi out(K);
  int base = m / K, rem = m % K;
  for (int k = 0; k < K; ++k) out[k] = base + (k < rem ? 1 : 0);
  return out;
}

bool ScenarioConfig::on_grid() const {
  bool m_ok = m == 200 || m == 500 || m == 1000 || m == 2000;
  bool mult_ok = n_multiplier == 4 || n_multiplier == 10;
  bool scheme_ok = scheme == "poisson" || scheme == "srswor";
  bool v_ok = v_obs >= 1 && v_obs <= 8;
  return m_ok && mult_ok && scheme_ok && v_ok;
}

namespace {

double oracle_tau(const Population& pop, Estimand estimand) {
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < pop.n(); ++i) {
    WeightValue wv = weight_value(estimand, pop.e_true[i]);
    double d = wv.w + wv.wdot * (pop.a[i] - pop.e_true[i]);
    num += d * (pop.y1[i] - pop.y0[i]);
    den += d;
  }
  if (den == 0.0) throw std::runtime_error("oracle denominator is zero");
  return num / den;
}

struct ScenarioContext {
  const ScenarioConfig& cfg;
  std::vector<std::string> keys;
  std::vector<std::string> ps_cols, out_cols;
  bool need_dr = false;
  ReferenceDesign rd;  // poisson only
};

ReplicationRecord run_one(const ScenarioContext& ctx, int rep) {
  const ScenarioConfig& cfg = ctx.cfg;
  ReplicationRecord rec;
  rec.rep = rep;
  try {
    const std::uint64_t rep_seed = hash_key(cfg.seed, kRepLayer, static_cast<std::uint64_t>(rep));
    Population pop = generate_population(cfg.n(), rep_seed);
    ObservationTable t = population_table(pop);
    StratumIndex s0 = build_strata(t, ctx.keys);

    Eigen::VectorXi delta;
    Eigen::VectorXd q;
    const std::uint64_t sample_seed = hash_key(rep_seed, kSampleLayer, 0);
    if (cfg.scheme == "poisson") {
      std::tie(delta, q) = poisson_sample(s0, align_reference_q(ctx.rd, s0), sample_seed);
    } else {
      std::tie(delta, q) = srswor_sample(s0, equal_allocation(cfg.m, s0.K()), sample_seed);
    }
    t.delta = delta;
    t.q = q;
    for (Eigen::Index i = 0; i < t.n(); ++i) {
      if (t.delta[i] == 1) continue;
      t.w.row(i).setConstant(kNan);
      if (!cfg.ods) t.y[i] = kNan;  // outcome is phase-2-only unless S contains Y
    }
    t.check();
    StratumIndex strata = build_strata(t, ctx.keys);

    NuisanceBundle bundle = ctx.need_dr ? fit_nuisances(t, ctx.ps_cols, ctx.out_cols)
                                        : fit_ps_only(t, ctx.ps_cols);

    for (Estimand estimand : cfg.estimands) {
      for (const std::string& name : cfg.estimators) {
        EstimateResult res = estimate(name, t, bundle, estimand, &strata);
        VarianceReport var = variance_for_estimate(t, bundle, res, &strata, cfg.level,
                                                   cfg.var_method);
        ReplicationCell cell;
        cell.estimator = name;
        cell.estimand = estimand;
        cell.tau = res.tau_hat;
        cell.se = var.se;
        cell.ci_lo = var.ci_lo;
        cell.ci_hi = var.ci_hi;
        cell.tau_corrected = kNan;
        rec.cells.push_back(cell);
      }
      ReplicationCell oracle;
      oracle.estimator = "oracle";
      oracle.estimand = estimand;
      oracle.tau = oracle_tau(pop, estimand);
      oracle.se = oracle.ci_lo = oracle.ci_hi = kNan;
      oracle.tau_corrected = kNan;
      rec.cells.push_back(oracle);
    }

    if (cfg.jackknife > 0) {
      JackknifePlan plan = partition_stratified(t.n(), t.delta, cfg.jackknife,
                                                hash_key(rep_seed, kJackLayer, 0));
      auto closure = [&ctx, &cfg](const ObservationTable& sub) {
        StratumIndex ss = build_strata(sub, ctx.keys);
        NuisanceBundle bb = ctx.need_dr ? fit_nuisances(sub, ctx.ps_cols, ctx.out_cols)
                                        : fit_ps_only(sub, ctx.ps_cols);
        std::vector<double> stats;
        for (Estimand estimand : cfg.estimands)
          for (const std::string& name : cfg.estimators)
            stats.push_back(estimate(name, sub, bb, estimand, &ss).tau_hat);
        return stats;
      };
      std::vector<JackknifeResult> jk = jackknife_correct_multi(closure, t, plan);
      std::size_t idx = 0;
      for (std::size_t ei = 0; ei < cfg.estimands.size(); ++ei)
        for (std::size_t ni = 0; ni < cfg.estimators.size(); ++ni) {
          // cells are laid out per estimand: estimators in order, then oracle
          std::size_t cell_idx = ei * (cfg.estimators.size() + 1) + ni;
          rec.cells[cell_idx].tau_corrected = jk[idx++].corrected;
        }
    }
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
    rec.cells.clear();
  }
  return rec;
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  if (cfg.m < 1 || cfg.n_multiplier < 1)
    throw std::invalid_argument("run_scenario: m and n_multiplier must be positive");
  if (cfg.replications < 1)
    throw std::invalid_argument("run_scenario: replications must be positive");
  if (cfg.v_obs < 1 || cfg.v_obs > 8)
    throw std::invalid_argument("run_scenario: v_obs must be in 1..8");
  if (cfg.scheme != "poisson" && cfg.scheme != "srswor")
    throw std::invalid_argument("run_scenario: unknown scheme '" + cfg.scheme + "'");
  if (cfg.estimands.empty() || cfg.estimators.empty())
    throw std::invalid_argument("run_scenario: estimands and estimators must be nonempty");
  for (const auto& name : cfg.estimators)
    if (name != "siw" && name != "eiw" && name != "sdr" && name != "edr")
      throw std::invalid_argument("run_scenario: unknown estimator '" + name + "'");

  ScenarioResult out;
  out.config = cfg;

  ReferenceSummary ref = reference_summary(cfg.reference_n, hash_key(cfg.seed, kRefLayer, 0));
  for (Estimand e : cfg.estimands) out.truths[e] = true_value(ref, e);
  out.prevalence = ref.prevalence;

  ScenarioContext ctx{cfg, {}, {}, {}, false, {}};
  ctx.keys = {"A", "V" + std::to_string(cfg.v_obs)};
  if (cfg.ods) ctx.keys.push_back("Y");
  if (cfg.ps_columns.empty())
    ctx.ps_cols = {"V1", "V2", "V3", "V4", "V5", "V6", "V7", "V8", "W"};
  else
    ctx.ps_cols = cfg.ps_columns;
  if (cfg.outcome_columns.empty())
    ctx.out_cols = {"V1", "V2", "V3", "V4", "V5", "V6", "V7", "V8", "W"};
  else
    ctx.out_cols = cfg.outcome_columns;
  for (const auto& name : cfg.estimators)
    if (name == "sdr" || name == "edr") ctx.need_dr = true;
  if (cfg.scheme == "poisson")
    ctx.rd = reference_design(ref, cfg.ods, cfg.v_obs, cfg.m, static_cast<double>(cfg.n()));

  const int R = cfg.replications;
  out.records.resize(static_cast<std::size_t>(R));
  const int threads = std::max(1, cfg.threads);
  if (threads == 1) {
    for (int r = 0; r < R; ++r) out.records[static_cast<std::size_t>(r)] = run_one(ctx, r);
  } else {
    std::atomic<int> next{0};
    auto worker = [&]() {
      for (;;) {
        int r = next.fetch_add(1);
        if (r >= R) break;
        out.records[static_cast<std::size_t>(r)] = run_one(ctx, r);
      }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::string first_error;
  for (const auto& rec : out.records)
    if (!rec.ok) {
      ++out.failures;
      if (first_error.empty()) first_error = rec.error;
    }
  if (out.failures * 100 > R)
    throw std::runtime_error("run_scenario: " + std::to_string(out.failures) + "/" +
                             std::to_string(R) + " replications failed (limit 1%); first: " +
                             first_error);
  return out;
}

namespace {

struct CellSeries {
  std::vector<double> tau, tau_corrected;
  std::vector<double> ci_lo, ci_hi;
};

double mean_of(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double sd_of(const std::vector<double>& x) {
  double m = mean_of(x), ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

double rmse_of(const std::vector<double>& x, double truth) {
  double ss = 0.0;
  for (double v : x) ss += (v - truth) * (v - truth);
  return std::sqrt(ss / static_cast<double>(x.size()));
}

}  // namespace

std::vector<MetricsRow> summarize(const ScenarioResult& result) {
  const ScenarioConfig& cfg = result.config;
  std::map<std::pair<std::string, int>, CellSeries> series;
  for (const auto& rec : result.records) {
    if (!rec.ok) continue;
    for (const auto& cell : rec.cells) {
      auto& cs = series[{cell.estimator, static_cast<int>(cell.estimand)}];
      cs.tau.push_back(cell.tau);
      cs.tau_corrected.push_back(cell.tau_corrected);
      cs.ci_lo.push_back(cell.ci_lo);
      cs.ci_hi.push_back(cell.ci_hi);
    }
  }

  std::vector<std::string> estimators = cfg.estimators;
  estimators.push_back("oracle");
  std::vector<MetricsRow> rows;
  for (Estimand estimand : cfg.estimands) {
    const int ek = static_cast<int>(estimand);
    auto it_or = series.find({"oracle", ek});
    if (it_or == series.end() || it_or->second.tau.size() < 2)
      throw std::invalid_argument("summarize: need >= 2 successful replications per cell");
    const double truth = result.truths.at(estimand);
    const double or_se = sd_of(it_or->second.tau);
    const double or_rmse = rmse_of(it_or->second.tau, truth);

    auto emit = [&](const std::string& name, const std::vector<double>& taus,
                    bool corrected, const CellSeries* cs) {
      MetricsRow row;
      row.scenario = cfg.name;
      row.estimator = name;
      row.estimand = estimand;
      row.corrected = corrected;
      row.replications_used = static_cast<int>(taus.size());
      row.truth = truth;
      row.bias = mean_of(taus) - truth;
      row.emp_se = sd_of(taus);
      row.rmse = rmse_of(taus, truth);
      row.rel_emp_se = or_se > 0.0 ? row.emp_se / or_se : kNan;
      row.rel_rmse = or_rmse > 0.0 ? row.rmse / or_rmse : kNan;
      row.pct_gain = kNan;
      row.coverage = kNan;
      if (!corrected && cs && name != "oracle") {
        int covered = 0, usable = 0;
        for (std::size_t i = 0; i < cs->ci_lo.size(); ++i) {
          if (std::isnan(cs->ci_lo[i]) || std::isnan(cs->ci_hi[i])) continue;
          ++usable;
          if (cs->ci_lo[i] <= truth && truth <= cs->ci_hi[i]) ++covered;
        }
        if (usable > 0) row.coverage = static_cast<double>(covered) / usable;
      }
      rows.push_back(row);
    };

    for (const std::string& name : estimators) {
      auto it = series.find({name, ek});
      if (it == series.end() || it->second.tau.size() < 2)
        throw std::invalid_argument("summarize: need >= 2 successful replications per cell");
      emit(name, it->second.tau, false, &it->second);
      if (cfg.jackknife > 0 && name != "oracle" &&
          !std::isnan(it->second.tau_corrected.front()))
        emit(name, it->second.tau_corrected, true, nullptr);
    }

    // enriched-vs-simple percentage gains
    auto find_row = [&rows, ek](const std::string& name, bool corrected) -> MetricsRow* {
      for (auto& r : rows)
        if (r.estimator == name && static_cast<int>(r.estimand) == ek &&
            r.corrected == corrected)
          return &r;
      return nullptr;
    };
    for (bool corrected : {false, true}) {
      for (auto [enr, simple] : {std::pair<const char*, const char*>{"eiw", "siw"},
                                 std::pair<const char*, const char*>{"edr", "sdr"}}) {
        MetricsRow* re = find_row(enr, corrected);
        MetricsRow* rs = find_row(simple, corrected);
        if (re && rs && rs->emp_se > 0.0)
          re->pct_gain = 100.0 * (rs->emp_se - re->emp_se) / rs->emp_se;
      }
    }
  }
  return rows;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << "scenario,estimator,estimand,corrected,replications_used,truth,bias,emp_se,rmse,"
         "rel_emp_se,rel_rmse,pct_gain,coverage\n";
  auto put = [&out](double x) {
    if (!std::isnan(x)) out << format_double(x);
  };
  for (const auto& r : rows) {
    out << r.scenario << ',' << r.estimator << ',' << estimand_name(r.estimand) << ','
        << (r.corrected ? 1 : 0) << ',' << r.replications_used << ',';
    put(r.truth);
    out << ',';
    put(r.bias);
    out << ',';
    put(r.emp_se);
    out << ',';
    put(r.rmse);
    out << ',';
    put(r.rel_emp_se);
    out << ',';
    put(r.rel_rmse);
    out << ',';
    put(r.pct_gain);
    out << ',';
    put(r.coverage);
    out << '\n';
  }
}

void write_metrics_markdown(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << "| estimator | estimand | corrected | bias | empSE | RMSE | rel empSE | rel RMSE "
         "| %gain | coverage |\n";
  out << "|---|---|---|---|---|---|---|---|---|---|\n";
  char buf[64];
  auto fmt = [&buf](double x) -> std::string {
    if (std::isnan(x)) return "";
    std::snprintf(buf, sizeof(buf), "%.4f", x);
    return buf;
  };
  for (const auto& r : rows) {
    out << "| " << r.estimator << " | " << estimand_name(r.estimand) << " | "
        << (r.corrected ? "yes" : "no") << " | " << fmt(r.bias) << " | " << fmt(r.emp_se)
        << " | " << fmt(r.rmse) << " | " << fmt(r.rel_emp_se) << " | " << fmt(r.rel_rmse)
        << " | " << fmt(r.pct_gain) << " | " << fmt(r.coverage) << " |\n";
  }
}

}  // namespace tpwate

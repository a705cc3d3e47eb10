#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tpwate/design.hpp"
#include "tpwate/inference.hpp"
#include "tpwate/jackknife.hpp"
#include "tpwate/simstudy.hpp"
#include "tpwate/twophase.hpp"

using nlohmann::json;
using namespace tpwate;

namespace {

constexpr const char* kVersion = "tpwate 0.1.0";

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot open '" + path + "' for writing");
  out << text;
}

struct RoleFlags {
  std::string delta_col = "delta", q_col = "q", treat_col = "a", outcome_col = "y";
  std::vector<std::string> v_cols, w_cols;

  ColumnRoles roles() const {
    return ColumnRoles{delta_col, q_col, treat_col, outcome_col, v_cols, w_cols};
  }

  void attach(CLI::App* cmd) {
    cmd->add_option("--delta-col", delta_col, "phase-2 indicator column");
    cmd->add_option("--q-col", q_col, "sampling probability column");
    cmd->add_option("--treat-col", treat_col, "treatment column");
    cmd->add_option("--outcome-col", outcome_col, "outcome column");
    cmd->add_option("--v-cols", v_cols, "low-cost covariate columns")->delimiter(',');
    cmd->add_option("--w-cols", w_cols, "high-cost covariate columns")->delimiter(',');
  }
};

json diagnostics_json(const ObservationTable& t, const EstimateResult& res,
                      const NuisanceBundle& bundle, bool dr) {
  json d;
  d["n"] = t.n();
  d["phase2_count"] = t.phase2_count();
  d["ps_clamp_count"] = res.rows.clamp_count;
  d["ps_converged"] = bundle.ps.converged;
  d["ps_iterations"] = bundle.ps.iterations;
  if (dr) {
    d["out1_converged"] = bundle.out1.converged;
    d["out0_converged"] = bundle.out0.converged;
  }
  return d;
}

int cmd_estimate(const RoleFlags& rf, const std::string& in_path, const std::string& out_path,
                 const std::string& estimator, const std::string& estimand_name_,
                 const std::vector<std::string>& strata_cols,
                 std::vector<std::string> ps_cols, std::vector<std::string> outcome_cols,
                 const std::string& var_method, bool ps_fixed, double level, int jackknife_d,
                 std::uint64_t seed, bool seed_given, const std::string& influence_out) {
  Estimand estimand = parse_estimand(estimand_name_);
  ObservationTable t = load_observations_file(in_path, rf.roles());
  const bool enriched = estimator == "eiw" || estimator == "edr";
  const bool dr = estimator == "sdr" || estimator == "edr";
  if (enriched && strata_cols.empty())
    throw std::invalid_argument("estimator '" + estimator + "' needs --strata-cols");
  if (jackknife_d > 0 && !seed_given)
    throw std::invalid_argument("--jackknife requires --seed");

  if (ps_cols.empty()) {
    ps_cols = t.v_names;
    ps_cols.insert(ps_cols.end(), t.w_names.begin(), t.w_names.end());
  }
  if (outcome_cols.empty()) {
    outcome_cols = t.v_names;
    outcome_cols.insert(outcome_cols.end(), t.w_names.begin(), t.w_names.end());
  }

  StratumIndex strata;
  const StratumIndex* sp = nullptr;
  if (!strata_cols.empty()) {
    strata = build_strata(t, strata_cols);
    sp = &strata;
  }
  NuisanceBundle bundle = dr ? fit_nuisances(t, ps_cols, outcome_cols)
                             : fit_ps_only(t, ps_cols);
  EstimateResult res = estimate(estimator, t, bundle, estimand, sp);
  VarianceReport var = variance_for_estimate(t, bundle, res, sp, level, var_method, ps_fixed);

  json out;
  out["estimator"] = estimator;
  out["estimand"] = estimand_name(estimand);
  out["tau_hat"] = res.tau_hat;
  if (std::isfinite(res.mu1_hat)) out["mu1_hat"] = res.mu1_hat;
  if (std::isfinite(res.mu0_hat)) out["mu0_hat"] = res.mu0_hat;
  out["se"] = var.se;
  out["ci_lo"] = var.ci_lo;
  out["ci_hi"] = var.ci_hi;
  out["level"] = level;
  out["var_method"] = var.method;
  out["diagnostics"] = diagnostics_json(t, res, bundle, dr);

  if (jackknife_d > 0) {
    JackknifePlan plan = partition_stratified(t.n(), t.delta, jackknife_d, seed);
    auto fn = [&](const ObservationTable& sub) {
      StratumIndex ss;
      const StratumIndex* ssp = nullptr;
      if (!strata_cols.empty()) {
        ss = build_strata(sub, strata_cols);
        ssp = &ss;
      }
      NuisanceBundle bb = dr ? fit_nuisances(sub, ps_cols, outcome_cols)
                             : fit_ps_only(sub, ps_cols);
      return estimate(estimator, sub, bb, estimand, ssp).tau_hat;
    };
    JackknifeResult jk = jackknife_correct(fn, t, plan);
    out["jackknife"] = {{"d_groups", jackknife_d},
                        {"seed", seed},
                        {"tau_corrected", jk.corrected},
                        {"replicates", jk.replicates}};
  }

  if (!influence_out.empty()) {
    InfluenceVector phi = estimator_influence(t, res, sp);  // per-row plug-in values
    std::ostringstream csv;
    csv << "row,influence\n";
    for (Eigen::Index i = 0; i < phi.values.size(); ++i)
      csv << i << ',' << format_double(phi.values[i]) << '\n';
    write_text(influence_out, csv.str());
  }

  write_text(out_path, out.dump(2) + "\n");
  return 0;
}

int cmd_design(const std::string& strata_path, double qbar, const std::string& method,
               const std::string& estimand_name_, const std::string& out_path) {
  std::ifstream in(strata_path);
  if (!in) throw std::invalid_argument("cannot open '" + strata_path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty strata file");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  auto col = [&header](const std::string& name) -> int {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return static_cast<int>(j);
    return -1;
  };
  int ck = col("k"), cp = col("p"), cs = col("sigma"), cx = col("xi"), ce = col("e");
  if (cp < 0) throw std::invalid_argument("strata file needs a 'p' column");
  std::vector<std::string> ks;
  std::vector<double> p, sigma, xi, e;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    auto get = [&](int j) {
      if (j < 0 || j >= static_cast<int>(cells.size()) || cells[j].empty())
        return std::nan("");
      return std::stod(cells[static_cast<std::size_t>(j)]);
    };
    ks.push_back(ck >= 0 && ck < static_cast<int>(cells.size())
                     ? cells[static_cast<std::size_t>(ck)]
                     : std::to_string(row));
    p.push_back(get(cp));
    sigma.push_back(get(cs));
    xi.push_back(get(cx));
    e.push_back(get(ce));
  }
  const int K = static_cast<int>(p.size());
  if (K == 0) throw std::invalid_argument("strata file has no data rows");

  DesignInput input;
  input.p = Eigen::Map<Eigen::VectorXd>(p.data(), K);
  input.qbar = qbar;
  Eigen::VectorXd q(K);
  json summary;
  if (method == "simple") {
    if (std::isnan(e[0])) throw std::invalid_argument("method 'simple' needs an 'e' column");
    Eigen::VectorXd ev = Eigen::Map<Eigen::VectorXd>(e.data(), K);
    Eigen::VectorXd score = simple_design_scores(parse_estimand(estimand_name_), ev);
    double denom = (input.p.array() * score.array()).sum();
    q = qbar / denom * score;
    summary["feasible"] = q.maxCoeff() <= 1.0 + 1e-12;
    summary["max_q"] = q.maxCoeff();
  } else {
    if (std::isnan(sigma[0]))
      throw std::invalid_argument("strata file needs a 'sigma' column");
    input.sigma = Eigen::Map<Eigen::VectorXd>(sigma.data(), K);
    DesignOutput d;
    if (method == "neyman") {
      d = neyman_allocation(input);
    } else if (method == "ipsw") {
      if (std::isnan(xi[0])) throw std::invalid_argument("method 'ipsw' needs an 'xi' column");
      input.xi = Eigen::Map<Eigen::VectorXd>(xi.data(), K);
      d = ipsw_allocation(input);
    } else {
      throw std::invalid_argument("unknown design method '" + method + "'");
    }
    q = d.q;
    summary["objective"] = d.objective;
    summary["objective_proportional"] = d.objective_proportional;
    // The objective scales with sigma^2; the ratio to proportional
    // allocation is scale-free.
    summary["objective_ratio_vs_proportional"] =
        d.objective_proportional > 0.0 ? d.objective / d.objective_proportional
                                       : std::nan("");
    summary["feasible"] = d.feasible;
    summary["max_q"] = d.max_q;
  }
  summary["method"] = method;
  summary["qbar"] = qbar;

  std::ostringstream csv;
  csv << "k,p,q\n";
  for (int k = 0; k < K; ++k)
    csv << ks[static_cast<std::size_t>(k)] << ',' << format_double(p[static_cast<std::size_t>(k)])
        << ',' << format_double(q[k]) << '\n';
  write_text(out_path, csv.str());
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_sample(const RoleFlags& rf, const std::string& in_path, const std::string& out_path,
               const std::vector<std::string>& strata_cols, const std::string& scheme,
               std::vector<double> qs, std::vector<int> ms, std::uint64_t seed,
               bool mask_outcome) {
  ObservationTable t = load_observations_file(in_path, rf.roles());
  if (strata_cols.empty()) throw std::invalid_argument("sample needs --strata-cols");
  StratumIndex strata = build_strata(t, strata_cols);
  Eigen::VectorXi delta;
  Eigen::VectorXd q;
  if (scheme == "poisson") {
    if (qs.empty()) throw std::invalid_argument("poisson sampling needs --q");
    if (qs.size() == 1) qs.assign(static_cast<std::size_t>(strata.K()), qs[0]);
    if (static_cast<int>(qs.size()) != strata.K())
      throw std::invalid_argument("--q must list one probability per stratum");
    Eigen::VectorXd qv = Eigen::Map<Eigen::VectorXd>(qs.data(), strata.K());
    std::tie(delta, q) = poisson_sample(strata, qv, seed);
  } else if (scheme == "srswor") {
    if (ms.empty()) throw std::invalid_argument("srswor sampling needs --m");
    if (ms.size() == 1) ms.assign(static_cast<std::size_t>(strata.K()), ms[0]);
    if (static_cast<int>(ms.size()) != strata.K())
      throw std::invalid_argument("--m must list one count per stratum");
    Eigen::VectorXi mv = Eigen::Map<Eigen::VectorXi>(ms.data(), strata.K());
    std::tie(delta, q) = srswor_sample(strata, mv, seed);
  } else {
    throw std::invalid_argument("unknown scheme '" + scheme + "'");
  }
  t.delta = delta;
  t.q = q;
  const double nan = std::nan("");
  for (Eigen::Index i = 0; i < t.n(); ++i) {
    if (t.delta[i] == 1) continue;
    t.w.row(i).setConstant(nan);
    if (mask_outcome) t.y[i] = nan;
  }
  t.check();
  std::ostringstream csv;
  save_observations(csv, t);
  write_text(out_path, csv.str());
  return 0;
}

int cmd_truth(long long n, std::uint64_t seed, const std::string& out_path) {
  ReferenceSummary s = reference_summary(n, seed);
  json out;
  out["n"] = s.n;
  out["prevalence"] = s.prevalence;
  out["ate"] = true_value(s, Estimand::ATE);
  out["att"] = true_value(s, Estimand::ATT);
  out["atc"] = true_value(s, Estimand::ATC);
  out["ato"] = true_value(s, Estimand::ATO);
  write_text(out_path, out.dump(2) + "\n");
  return 0;
}

ScenarioConfig parse_scenario(const json& j) {
  ScenarioConfig cfg;
  if (!j.contains("seed")) throw std::invalid_argument("scenario config needs a 'seed'");
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.m = j.value("m", cfg.m);
  cfg.n_multiplier = j.value("n_multiplier", cfg.n_multiplier);
  cfg.scheme = j.value("scheme", cfg.scheme);
  cfg.ods = j.value("ods", cfg.ods);
  cfg.v_obs = j.value("v_obs", cfg.v_obs);
  cfg.replications = j.value("replications", cfg.replications);
  cfg.jackknife = j.value("jackknife", cfg.jackknife);
  cfg.reference_n = j.value("reference_n", cfg.reference_n);
  cfg.var_method = j.value("var_method", cfg.var_method);
  cfg.level = j.value("level", cfg.level);
  cfg.threads = j.value("threads", cfg.threads);
  cfg.name = j.value("name", cfg.name);
  if (j.contains("estimands")) {
    cfg.estimands.clear();
    for (const auto& e : j.at("estimands")) cfg.estimands.push_back(parse_estimand(e));
  }
  if (j.contains("estimators"))
    cfg.estimators = j.at("estimators").get<std::vector<std::string>>();
  if (j.contains("ps_columns"))
    cfg.ps_columns = j.at("ps_columns").get<std::vector<std::string>>();
  if (j.contains("outcome_columns"))
    cfg.outcome_columns = j.at("outcome_columns").get<std::vector<std::string>>();
  return cfg;
}

int cmd_simulate(const std::string& config_path, const std::string& out_path,
                 const std::string& format, int threads_override) {
  std::ifstream in(config_path);
  if (!in) throw std::invalid_argument("cannot open '" + config_path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config parse error: ") + e.what());
  }
  std::vector<ScenarioConfig> configs;
  if (j.contains("scenarios"))
    for (const auto& s : j.at("scenarios")) configs.push_back(parse_scenario(s));
  else
    configs.push_back(parse_scenario(j));

  std::vector<MetricsRow> all_rows;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    ScenarioConfig& cfg = configs[i];
    if (threads_override > 0) cfg.threads = threads_override;
    if (cfg.name.empty()) cfg.name = "scenario" + std::to_string(i + 1);
    if (!cfg.on_grid())
      std::cerr << "note: scenario '" << cfg.name << "' is outside the studied grid "
                << "(extended=true)\n";
    ScenarioResult result = run_scenario(cfg);
    if (result.failures > 0)
      std::cerr << "note: scenario '" << cfg.name << "' dropped " << result.failures
                << " failed replications\n";
    std::vector<MetricsRow> rows = summarize(result);
    all_rows.insert(all_rows.end(), rows.begin(), rows.end());
  }
  std::ostringstream os;
  if (format == "md")
    write_metrics_markdown(os, all_rows);
  else
    write_metrics_csv(os, all_rows);
  write_text(out_path, os.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weighted treatment-effect estimation under two-phase sampling"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // estimate
  auto* est = app.add_subcommand("estimate", "estimate a WATE from a two-phase CSV");
  RoleFlags est_roles;
  est_roles.attach(est);
  std::string est_in, est_out = "-", est_name = "edr", est_estimand = "ate";
  std::vector<std::string> est_strata, est_ps_cols, est_out_cols;
  std::string est_var = "eif", est_influence;
  bool est_ps_fixed = false;
  double est_level = 0.95;
  int est_jk = 0;
  std::uint64_t est_seed = 0;
  est->add_option("--in", est_in, "input CSV")->required();
  est->add_option("--out", est_out, "output JSON path ('-' for stdout)");
  est->add_option("--estimator", est_name, "siw|eiw|sdr|edr")
      ->check(CLI::IsMember({"siw", "eiw", "sdr", "edr"}));
  est->add_option("--estimand", est_estimand, "ate|att|atc|ato")
      ->check(CLI::IsMember({"ate", "att", "atc", "ato"}));
  est->add_option("--strata-cols", est_strata, "phase-1 columns defining S strata")
      ->delimiter(',');
  est->add_option("--ps-cols", est_ps_cols, "propensity design columns")->delimiter(',');
  est->add_option("--outcome-cols", est_out_cols, "outcome design columns")->delimiter(',');
  est->add_option("--var-method", est_var, "eif|sandwich")
      ->check(CLI::IsMember({"eif", "sandwich"}));
  est->add_flag("--ps-fixed", est_ps_fixed, "treat the propensity model as known (sandwich)");
  est->add_option("--level", est_level, "confidence level")->check(CLI::Range(0.5, 0.9999));
  est->add_option("--jackknife", est_jk, "delete-d jackknife groups (0 = off)");
  auto* est_seed_opt = est->add_option("--seed", est_seed, "partition seed");
  est->add_option("--influence-out", est_influence, "per-row influence CSV path");

  // design
  auto* des = app.add_subcommand("design", "optimal phase-2 allocation from stratum summaries");
  std::string des_strata, des_method = "neyman", des_estimand = "ate", des_out = "-";
  double des_qbar = 0.0;
  des->add_option("--strata", des_strata, "stratum CSV (k,p,sigma[,xi][,e])")->required();
  des->add_option("--qbar", des_qbar, "overall sampling fraction")->required();
  des->add_option("--method", des_method, "neyman|ipsw|simple")
      ->check(CLI::IsMember({"neyman", "ipsw", "simple"}));
  des->add_option("--estimand", des_estimand, "estimand for method 'simple'")
      ->check(CLI::IsMember({"ate", "att", "atc", "ato"}));
  des->add_option("--out", des_out, "allocation CSV path");

  // sample
  auto* smp = app.add_subcommand("sample", "draw phase-2 indicators for a table");
  RoleFlags smp_roles;
  smp_roles.attach(smp);
  std::string smp_in, smp_out = "-", smp_scheme = "poisson";
  std::vector<std::string> smp_strata;
  std::vector<double> smp_q;
  std::vector<int> smp_m;
  std::uint64_t smp_seed = 0;
  bool smp_mask_outcome = false;
  smp->add_option("--in", smp_in, "input CSV")->required();
  smp->add_option("--out", smp_out, "output CSV path");
  smp->add_option("--strata-cols", smp_strata, "stratum key columns")->delimiter(',');
  smp->add_option("--scheme", smp_scheme, "poisson|srswor")
      ->check(CLI::IsMember({"poisson", "srswor"}));
  smp->add_option("--q", smp_q, "per-stratum probabilities (or one broadcast value)")
      ->delimiter(',');
  smp->add_option("--m", smp_m, "per-stratum SRSWOR counts (or one broadcast value)")
      ->delimiter(',');
  smp->add_option("--seed", smp_seed, "sampling seed")->required();
  smp->add_flag("--mask-outcome", smp_mask_outcome, "blank the outcome where delta=0");

  // truth
  auto* tru = app.add_subcommand("truth", "reference-population target values");
  long long tru_n = 10000000;
  std::uint64_t tru_seed = 0;
  std::string tru_out = "-";
  tru->add_option("--n", tru_n, "reference population size");
  tru->add_option("--seed", tru_seed, "generation seed")->required();
  tru->add_option("--out", tru_out, "output JSON path");

  // simulate
  auto* sim = app.add_subcommand("simulate", "run Monte Carlo scenarios from a config");
  std::string sim_config, sim_out = "-", sim_format = "csv";
  int sim_threads = 0;
  sim->add_option("--config", sim_config, "scenario config (JSON)")->required();
  sim->add_option("--out", sim_out, "metrics output path");
  sim->add_option("--format", sim_format, "csv|md")->check(CLI::IsMember({"csv", "md"}));
  sim->add_option("--threads", sim_threads, "worker threads (overrides config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (est->parsed())
      return cmd_estimate(est_roles, est_in, est_out, est_name, est_estimand, est_strata,
                          est_ps_cols, est_out_cols, est_var, est_ps_fixed, est_level,
                          est_jk, est_seed, est_seed_opt->count() > 0, est_influence);
    if (des->parsed()) return cmd_design(des_strata, des_qbar, des_method, des_estimand, des_out);
    if (smp->parsed())
      return cmd_sample(smp_roles, smp_in, smp_out, smp_strata, smp_scheme, smp_q, smp_m,
                        smp_seed, smp_mask_outcome);
    if (tru->parsed()) return cmd_truth(tru_n, tru_seed, tru_out);
    if (sim->parsed()) {
      if (sim_threads == 0)
        if (const char* env = std::getenv("TPWATE_THREADS")) sim_threads = std::atoi(env);
      return cmd_simulate(sim_config, sim_out, sim_format, sim_threads);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

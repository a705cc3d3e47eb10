#include <pybind11/pybind11.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/stl.h>

#include "tpwate/design.hpp"
#include "tpwate/estimators.hpp"
#include "tpwate/inference.hpp"
#include "tpwate/jackknife.hpp"
#include "tpwate/rng.hpp"
#include "tpwate/simstudy.hpp"
#include "tpwate/twophase.hpp"

namespace py = pybind11;
using namespace tpwate;

PYBIND11_MODULE(_core, m) {
    m.doc() = "Weighted treatment-effect estimation under two-phase sampling";

    // =========================================================================
    // Estimands and balancing weights
    // =========================================================================
    py::enum_<Estimand>(m, "Estimand")
        .value("ATE", Estimand::ATE)
        .value("ATT", Estimand::ATT)
        .value("ATC", Estimand::ATC)
        .value("ATO", Estimand::ATO)
        .export_values();

    py::class_<WeightValue>(m, "WeightValue")
        .def_readonly("w", &WeightValue::w)
        .def_readonly("wdot", &WeightValue::wdot)
        .def_readonly("wddot", &WeightValue::wddot);

    m.def("weight_value", &weight_value, py::arg("estimand"), py::arg("e"),
          "Balancing weight w_e and its derivatives at propensity e");
    m.def("parse_estimand", &parse_estimand, py::arg("name"));
    m.def("estimand_name", &estimand_name, py::arg("estimand"));
    m.def("supports_double_robustness", &supports_double_robustness, py::arg("estimand"));
    m.def("normal_quantile", &normal_quantile, py::arg("p"));

    // =========================================================================
    // Two-phase observation tables
    // =========================================================================
    py::class_<ColumnRoles>(m, "ColumnRoles")
        .def(py::init<>())
        .def_readwrite("delta_col", &ColumnRoles::delta_col)
        .def_readwrite("q_col", &ColumnRoles::q_col)
        .def_readwrite("treat_col", &ColumnRoles::treat_col)
        .def_readwrite("outcome_col", &ColumnRoles::outcome_col)
        .def_readwrite("v_cols", &ColumnRoles::v_cols)
        .def_readwrite("w_cols", &ColumnRoles::w_cols);

    py::class_<ObservationTable>(m, "ObservationTable")
        .def(py::init<>())
        .def_readwrite("a", &ObservationTable::a)
        .def_readwrite("y", &ObservationTable::y)
        .def_readwrite("v", &ObservationTable::v)
        .def_readwrite("w", &ObservationTable::w)
        .def_readwrite("delta", &ObservationTable::delta)
        .def_readwrite("q", &ObservationTable::q)
        .def_readwrite("v_names", &ObservationTable::v_names)
        .def_readwrite("w_names", &ObservationTable::w_names)
        .def_readwrite("treat_name", &ObservationTable::treat_name)
        .def_readwrite("outcome_name", &ObservationTable::outcome_name)
        .def("n", &ObservationTable::n)
        .def("phase2_count", &ObservationTable::phase2_count)
        .def("check", &ObservationTable::check)
        .def("subset", &ObservationTable::subset, py::arg("keep_rows"));

    m.def("load_observations", &load_observations_file, py::arg("path"), py::arg("roles"));
    m.def("save_observations", &save_observations_file, py::arg("path"), py::arg("table"));

    py::class_<StratumIndex>(m, "StratumIndex")
        .def_readonly("key_columns", &StratumIndex::key_columns)
        .def_readonly("labels", &StratumIndex::labels)
        .def_readonly("keys", &StratumIndex::keys)
        .def_readonly("counts", &StratumIndex::counts)
        .def_readonly("phase2_counts", &StratumIndex::phase2_counts)
        .def_readonly("shares", &StratumIndex::shares)
        .def("K", &StratumIndex::K);

    m.def("build_strata", &build_strata, py::arg("table"), py::arg("key_columns"));

    py::class_<ValidationReport>(m, "ValidationReport")
        .def_readonly("violations", &ValidationReport::violations)
        .def_readonly("warnings", &ValidationReport::warnings)
        .def_readonly("notes", &ValidationReport::notes)
        .def_readonly("phase2_fraction", &ValidationReport::phase2_fraction)
        .def("ok", &ValidationReport::ok);

    m.def("validate", py::overload_cast<const ObservationTable&>(&validate), py::arg("table"));

    // =========================================================================
    // Nuisance models and point estimation
    // =========================================================================
    py::class_<FittedGLM>(m, "FittedGLM")
        .def_readonly("coefficients", &FittedGLM::coefficients)
        .def_readonly("design_columns", &FittedGLM::design_columns)
        .def_readonly("converged", &FittedGLM::converged)
        .def_readonly("iterations", &FittedGLM::iterations)
        .def_readonly("final_score_norm", &FittedGLM::final_score_norm);

    py::class_<NuisanceBundle>(m, "NuisanceBundle")
        .def_readonly("ps", &NuisanceBundle::ps)
        .def_readonly("out1", &NuisanceBundle::out1)
        .def_readonly("out0", &NuisanceBundle::out0)
        .def_readonly("ps_columns", &NuisanceBundle::ps_columns)
        .def_readonly("outcome_columns", &NuisanceBundle::outcome_columns);

    m.def("fit_nuisances", &fit_nuisances, py::arg("table"), py::arg("ps_columns"),
          py::arg("outcome_columns"));
    m.def("fit_ps_only", &fit_ps_only, py::arg("table"), py::arg("ps_columns"));

    py::class_<EstimateResult>(m, "EstimateResult")
        .def_readonly("estimand", &EstimateResult::estimand)
        .def_readonly("estimator", &EstimateResult::estimator)
        .def_readonly("tau_hat", &EstimateResult::tau_hat)
        .def_readonly("mu1_hat", &EstimateResult::mu1_hat)
        .def_readonly("mu0_hat", &EstimateResult::mu0_hat)
        .def_readonly("stratum_means", &EstimateResult::stratum_means)
        .def_readonly("empty_strata", &EstimateResult::empty_strata);

    m.def(
        "estimate",
        [](const std::string& estimator, const ObservationTable& t, const NuisanceBundle& b,
           Estimand estimand, const StratumIndex* strata) {
            return estimate(estimator, t, b, estimand, strata);
        },
        py::arg("estimator"), py::arg("table"), py::arg("bundle"), py::arg("estimand"),
        py::arg("strata") = nullptr);

    // =========================================================================
    // Inference
    // =========================================================================
    py::class_<InfluenceVector>(m, "InfluenceVector")
        .def_readonly("values", &InfluenceVector::values)
        .def_readonly("kind", &InfluenceVector::kind)
        .def_readonly("centered", &InfluenceVector::centered);

    py::class_<VarianceReport>(m, "VarianceReport")
        .def_readonly("variance_of_if", &VarianceReport::variance_of_if)
        .def_readonly("se", &VarianceReport::se)
        .def_readonly("ci_lo", &VarianceReport::ci_lo)
        .def_readonly("ci_hi", &VarianceReport::ci_hi)
        .def_readonly("level", &VarianceReport::level)
        .def_readonly("method", &VarianceReport::method);

    m.def(
        "estimator_influence",
        [](const ObservationTable& t, const EstimateResult& est, const StratumIndex* strata) {
            return estimator_influence(t, est, strata);
        },
        py::arg("table"), py::arg("estimate"), py::arg("strata") = nullptr);
    m.def(
        "variance_for_estimate",
        [](const ObservationTable& t, const NuisanceBundle& b, const EstimateResult& est,
           const StratumIndex* strata, double level, const std::string& method, bool ps_fixed) {
            return variance_for_estimate(t, b, est, strata, level, method, ps_fixed);
        },
        py::arg("table"), py::arg("bundle"), py::arg("estimate"), py::arg("strata") = nullptr,
        py::arg("level") = 0.95, py::arg("method") = "eif", py::arg("ps_fixed") = false);

    // =========================================================================
    // Delete-d jackknife
    // =========================================================================
    py::class_<JackknifePlan>(m, "JackknifePlan")
        .def_readonly("D", &JackknifePlan::D)
        .def_readonly("group_of", &JackknifePlan::group_of)
        .def_readonly("seed", &JackknifePlan::seed);

    py::class_<JackknifeResult>(m, "JackknifeResult")
        .def_readonly("corrected", &JackknifeResult::corrected)
        .def_readonly("full", &JackknifeResult::full)
        .def_readonly("replicates", &JackknifeResult::replicates);

    m.def("partition_stratified", &partition_stratified, py::arg("n"), py::arg("delta"),
          py::arg("D"), py::arg("seed"));
    m.def("jackknife_correct", &jackknife_correct, py::arg("fn"), py::arg("table"),
          py::arg("plan"));

    // =========================================================================
    // Phase-2 design and sampling
    // =========================================================================
    py::class_<DesignInput>(m, "DesignInput")
        .def(py::init<>())
        .def_readwrite("p", &DesignInput::p)
        .def_readwrite("sigma", &DesignInput::sigma)
        .def_readwrite("xi", &DesignInput::xi)
        .def_readwrite("qbar", &DesignInput::qbar);

    py::class_<DesignOutput>(m, "DesignOutput")
        .def_readonly("q", &DesignOutput::q)
        .def_readonly("objective", &DesignOutput::objective)
        .def_readonly("objective_proportional", &DesignOutput::objective_proportional)
        .def_readonly("feasible", &DesignOutput::feasible)
        .def_readonly("max_q", &DesignOutput::max_q);

    m.def("neyman_allocation", &neyman_allocation, py::arg("input"));
    m.def("ipsw_allocation", &ipsw_allocation, py::arg("input"));
    m.def("simple_design_scores", &simple_design_scores, py::arg("estimand"), py::arg("e"));

    py::class_<BoundReport>(m, "BoundReport")
        .def_readonly("v_w", &BoundReport::v_w)
        .def_readonly("v_w_alt", &BoundReport::v_w_alt);

    m.def("efficiency_bound", &efficiency_bound, py::arg("phi"), py::arg("stratum_of"),
          py::arg("q_by_stratum"));
    m.def("enrichment_gain", &enrichment_gain, py::arg("phi"), py::arg("stratum_of"),
          py::arg("q_by_stratum"));

    m.def("poisson_sample", &poisson_sample, py::arg("strata"), py::arg("q_by_stratum"),
          py::arg("seed"));
    m.def("srswor_sample", &srswor_sample, py::arg("strata"), py::arg("m_by_stratum"),
          py::arg("seed"));

    // =========================================================================
    // Synthetic cohorts for the simulation study
    // =========================================================================
    py::class_<Population>(m, "Population")
        .def_readonly("a", &Population::a)
        .def_readonly("v", &Population::v)
        .def_readonly("w", &Population::w)
        .def_readonly("y1", &Population::y1)
        .def_readonly("y0", &Population::y0)
        .def_readonly("y", &Population::y)
        .def_readonly("e_true", &Population::e_true)
        .def("n", &Population::n);

    m.def("generate_population", &generate_population, py::arg("n"), py::arg("seed"));
    m.def("population_table", &population_table, py::arg("population"));
    m.def("reference_truths", [](long long n, std::uint64_t seed) {
        ReferenceSummary s = reference_summary(n, seed);
        py::dict out;
        out["n"] = s.n;
        out["prevalence"] = s.prevalence;
        out["ate"] = true_value(s, Estimand::ATE);
        out["att"] = true_value(s, Estimand::ATT);
        out["atc"] = true_value(s, Estimand::ATC);
        out["ato"] = true_value(s, Estimand::ATO);
        return out;
    }, py::arg("n"), py::arg("seed"));
}

"""Weighted treatment-effect estimation under two-phase sampling."""

from tpwate._core import (  # noqa: F401
    BoundReport,
    ColumnRoles,
    DesignInput,
    DesignOutput,
    Estimand,
    EstimateResult,
    FittedGLM,
    InfluenceVector,
    JackknifePlan,
    JackknifeResult,
    NuisanceBundle,
    ObservationTable,
    Population,
    StratumIndex,
    ValidationReport,
    VarianceReport,
    WeightValue,
    build_strata,
    efficiency_bound,
    enrichment_gain,
    estimand_name,
    estimate,
    estimator_influence,
    fit_nuisances,
    fit_ps_only,
    generate_population,
    ipsw_allocation,
    jackknife_correct,
    load_observations,
    neyman_allocation,
    normal_quantile,
    parse_estimand,
    partition_stratified,
    poisson_sample,
    population_table,
    reference_truths,
    save_observations,
    simple_design_scores,
    srswor_sample,
    supports_double_robustness,
    validate,
    variance_for_estimate,
    weight_value,
)

__version__ = "0.1.0"


def estimate_file(path, estimator="edr", estimand="ate", strata_cols=(),
                  ps_cols=None, outcome_cols=None, roles=None, level=0.95,
                  var_method="eif"):
    """One-call estimation from a CSV file; returns (EstimateResult, VarianceReport)."""
    if roles is None:
        roles = ColumnRoles()
        roles.delta_col, roles.q_col = "delta", "q"
        roles.treat_col, roles.outcome_col = "a", "y"
    table = load_observations(path, roles)
    kind = parse_estimand(estimand) if isinstance(estimand, str) else estimand
    default_cols = list(table.v_names) + list(table.w_names)
    ps_cols = list(ps_cols) if ps_cols else default_cols
    outcome_cols = list(outcome_cols) if outcome_cols else default_cols
    strata = build_strata(table, list(strata_cols)) if strata_cols else None
    if estimator in ("sdr", "edr"):
        bundle = fit_nuisances(table, ps_cols, outcome_cols)
    else:
        bundle = fit_ps_only(table, ps_cols)
    result = estimate(estimator, table, bundle, kind, strata)
    report = variance_for_estimate(table, bundle, result, strata, level, var_method)
    return result, report

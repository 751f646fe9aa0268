"""Certified-robustness estimation for randomized smoothing.

The package answers four questions about a smoothed classifier certified
from Monte Carlo votes:

* how large a robustness radius does one point get from its votes
  (``certify``, ``cp_lower_bound``, ``certified_radius``),
* how does that radius move with the sample count
  (``expected_radius``, ``limit_radius``, ``infer_pa``),
* how many samples does a target radius cost (``plan_samples``),
* and what happens on average over a whole dataset
  (``average_radius``, ``ratio_theoretical``, ``certified_accuracy``),

with a deterministic simulation harness (``run_bound_comparison``,
``run_ratio_experiment``, ``run_accuracy_curves``) checking the closed
forms against measurement.
"""

from ._version import __version__
from .bounds import (
    ONE_SIDED_QUANTILE,
    SHORE_EXPONENT,
    TWO_SIDED_QUANTILE,
    ConfidenceSpec,
    ProbEstimate,
    clt_lower_bound,
    cp_lower_bound,
    normal_cdf,
    normal_pdf,
    normal_quantile,
    shore_quantile,
)
from .certify import (
    CLOPPER_PEARSON,
    CLT,
    Abstain,
    BatchError,
    CertificationOutcome,
    Certified,
    certify,
    certify_batch,
    outcome_from_dict,
    outcome_to_dict,
    read_outcomes,
    write_outcomes,
)
from .harness import (
    ExperimentReport,
    ReportRow,
    SweepGrid,
    default_radius_grid,
    grid_from_dict,
    grid_to_dict,
    run_accuracy_curves,
    run_bound_comparison,
    run_ratio_experiment,
)
from .oracles import (
    PROTOCOL_NAME,
    PROTOCOL_VERSION,
    SINGLE_RIVAL,
    UNIFORM_RIVALS,
    ExternalOracle,
    OracleError,
    ProtocolError,
    RecordedOracle,
    RecordedVotesError,
    SyntheticOracle,
    VoteTally,
    draw_votes,
    load_recorded_votes,
)
from .population import (
    AccuracyQuery,
    PADistribution,
    accuracy_drop_bound,
    average_radius,
    certified_accuracy,
    fit_empirical_pa,
    h_function,
    load_empirical_csv,
    ratio_theoretical,
    save_empirical_csv,
    theta_numeric,
)
from .quadrature import adaptive_simpson
from .radius import (
    EXACT_QUANTILE,
    P_CAP,
    SHORE_EXPANSION,
    RadiusPrediction,
    SamplePlan,
    SaturatedRadiusError,
    SmoothingConfig,
    certified_radius,
    expected_radius,
    infer_pa,
    limit_radius,
    plan_samples,
    shrinkage_term,
)

__all__ = [
    "__version__",
    "ONE_SIDED_QUANTILE",
    "SHORE_EXPONENT",
    "TWO_SIDED_QUANTILE",
    "ConfidenceSpec",
    "ProbEstimate",
    "clt_lower_bound",
    "cp_lower_bound",
    "normal_cdf",
    "normal_pdf",
    "normal_quantile",
    "shore_quantile",
    "CLOPPER_PEARSON",
    "CLT",
    "Abstain",
    "BatchError",
    "CertificationOutcome",
    "Certified",
    "certify",
    "certify_batch",
    "outcome_from_dict",
    "outcome_to_dict",
    "read_outcomes",
    "write_outcomes",
    "ExperimentReport",
    "ReportRow",
    "SweepGrid",
    "default_radius_grid",
    "grid_from_dict",
    "grid_to_dict",
    "run_accuracy_curves",
    "run_bound_comparison",
    "run_ratio_experiment",
    "PROTOCOL_NAME",
    "PROTOCOL_VERSION",
    "SINGLE_RIVAL",
    "UNIFORM_RIVALS",
    "ExternalOracle",
    "OracleError",
    "ProtocolError",
    "RecordedOracle",
    "RecordedVotesError",
    "SyntheticOracle",
    "VoteTally",
    "draw_votes",
    "load_recorded_votes",
    "AccuracyQuery",
    "PADistribution",
    "accuracy_drop_bound",
    "average_radius",
    "certified_accuracy",
    "fit_empirical_pa",
    "h_function",
    "load_empirical_csv",
    "ratio_theoretical",
    "save_empirical_csv",
    "theta_numeric",
    "adaptive_simpson",
    "EXACT_QUANTILE",
    "P_CAP",
    "SHORE_EXPANSION",
    "RadiusPrediction",
    "SamplePlan",
    "SaturatedRadiusError",
    "SmoothingConfig",
    "certified_radius",
    "expected_radius",
    "infer_pa",
    "limit_radius",
    "plan_samples",
    "shrinkage_term",
]

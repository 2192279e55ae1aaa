"""Processor-sharing queue toolkit.

Closed-form analysis of the batch-arrival PS queue with hyper-exponential
job sizes, evaluation and optimization of the two-level PS threshold
discipline, and a discrete-event simulator that validates every formula.
"""

from .bps import (
    BpsInput,
    BpsSolution,
    alpha,
    alpha_derivatives,
    bin_conditional_sojourn,
    kleinrock_residual,
    mean_sojourn_bps,
    response_curve,
    solve_bps,
)
from .cauchy import CauchySystem, cauchy_determinant, solve_closed_form, solve_direct
from .distributions import (
    HyperExp,
    TruncatedStats,
    ccdf,
    excess_law,
    hyperexp_from_json,
    hyperexp_to_json,
    make_hyperexp,
    mean,
    sample,
    second_moment,
    truncated_stats,
)
from .sim import (
    BatchLaw,
    BinStat,
    SimConfig,
    SimResult,
    batch_law_stats,
    simresult_to_json,
    simulate_bps,
    simulate_tlps,
)
from .spectral import SecularProblem, SpectralRoots, find_roots, psi_eval
from .tlps import (
    SweepReport,
    TlpsEvaluation,
    TlpsModel,
    bin_conditional_sojourn_tlps,
    conditional_from_evaluation,
    conditional_sojourn,
    default_theta_grid,
    evaluate_tlps,
    optimize_theta,
    sweep_theta,
    t_mean_via_embedded,
)

__version__ = "0.1.0"

__all__ = [
    "BatchLaw",
    "BinStat",
    "BpsInput",
    "BpsSolution",
    "CauchySystem",
    "HyperExp",
    "SecularProblem",
    "SimConfig",
    "SimResult",
    "SpectralRoots",
    "SweepReport",
    "TlpsEvaluation",
    "TlpsModel",
    "TruncatedStats",
    "alpha",
    "alpha_derivatives",
    "batch_law_stats",
    "bin_conditional_sojourn",
    "bin_conditional_sojourn_tlps",
    "cauchy_determinant",
    "ccdf",
    "conditional_from_evaluation",
    "conditional_sojourn",
    "default_theta_grid",
    "evaluate_tlps",
    "excess_law",
    "find_roots",
    "hyperexp_from_json",
    "hyperexp_to_json",
    "kleinrock_residual",
    "make_hyperexp",
    "mean",
    "mean_sojourn_bps",
    "optimize_theta",
    "psi_eval",
    "response_curve",
    "sample",
    "second_moment",
    "simresult_to_json",
    "simulate_bps",
    "simulate_tlps",
    "solve_bps",
    "solve_closed_form",
    "solve_direct",
    "sweep_theta",
    "t_mean_via_embedded",
    "truncated_stats",
]

"""Certified asymptotic and finite-size key rates for DM CV-QKD."""

from ._dmcv import (
    DualCertificate,
    HonestChannel,
    HonestStatistics,
    ModulationScheme,
    RateGrids,
    RatePoint,
    SecurityParams,
    SolveResult,
    asymptotic_rate,
    default_rate_grids,
    ec_leak_rate,
    gamma_fn,
    honest_statistics,
    multinoulli_deviation,
    optimize_rate,
    pe_statistics,
    sample_rounds,
    solve_asymptotic,
)

__all__ = [
    "DualCertificate",
    "HonestChannel",
    "HonestStatistics",
    "ModulationScheme",
    "RateGrids",
    "RatePoint",
    "SecurityParams",
    "SolveResult",
    "asymptotic_rate",
    "default_rate_grids",
    "ec_leak_rate",
    "gamma_fn",
    "honest_statistics",
    "multinoulli_deviation",
    "optimize_rate",
    "pe_statistics",
    "sample_rounds",
    "solve_asymptotic",
]

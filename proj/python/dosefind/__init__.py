"""Dose-finding MED estimation toolkit.

Model fits on a shape-parameter grid, MED estimators that stay reliable when
the fitted dose-response model is wrong (iteratively reweighted least squares
and weighted estimating equations), four confidence interval constructions,
the MCP-Mod pipeline, and scenario-driven simulation studies.
"""

from ._core import (
    BootstrapFailureError,
    InputError,
    RankDeficiencyError,
    bootstrap_band,
    fit,
    invert_band,
    mcpmod,
    med_classical,
    med_irwls,
    med_rr,
    models,
    normalize_scenario,
    profile_band,
    run_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "BootstrapFailureError",
    "InputError",
    "RankDeficiencyError",
    "bootstrap_band",
    "fit",
    "invert_band",
    "mcpmod",
    "med_classical",
    "med_irwls",
    "med_rr",
    "models",
    "normalize_scenario",
    "profile_band",
    "run_scenario",
    "__version__",
]

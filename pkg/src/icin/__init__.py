"""Saturated full-data models under itemwise conditionally independent nonresponse."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .lattice import (
    Pattern,
    PatternSet,
    full_lattice,
    precedes,
    sibling_pattern,
    strict_predecessors,
    traversal_order,
)
from .categorical import (
    CategoricalSpace,
    FullDataDistribution,
    LoglinearDecomposition,
    ObservedDistribution,
    build_eta,
    build_full_data,
    event_probability,
    item_marginal,
    loglinear_decomposition,
    missingness_logit,
    simulate,
)
from .sensitivity import (
    SensitivityFunction,
    SensitivityGrid,
    build_full_data_xi,
    conditional_log_odds_ratio,
    run_grid,
    xi_log_odds_ratio,
)
from .posterior import (
    DirichletSpec,
    ObservedCounts,
    PosteriorDraws,
    push_forward,
    sample_posterior,
    summarize,
)
from .monotone import (
    DropoutPatternSet,
    build_monotone,
    dropout_time,
    sequential_log_odds,
)
from .diagnostics import FeasibilityReport, convex_feasibility, hausman_wise_closed_form
from .continuous import (
    BivariateIcin,
    GridSpec,
    KdeDensity,
    WeightedSample,
    fit_bivariate,
    missingness_curves,
    pattern_functionals,
    pattern_proportions,
    silverman_bandwidth,
)

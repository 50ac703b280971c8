"""Exact post-selection inference for lasso and elastic-net selected linear models."""

from .errors import *  # noqa: F401,F403
from .lasso import DesignMatrix, LassoSolution, PenaltySpec, SolverOptions, kkt_check, solve
from .pipeline import (
    MODEL,
    SIGN,
    InferenceResult,
    InferenceTarget,
    SelectiveInterval,
    data_split_baseline,
    estimate_sigma,
    infer,
    naive_intervals,
    select_lambda,
)
from .pivot import ContrastDecomposition, decompose, truncation_limits, union_region
from .selection import (
    SelectionPolyhedron,
    build_polyhedron,
    enumerate_sign_polyhedra,
    membership_oracle,
)
from .simulation import (
    CoverageReport,
    ExperimentConfig,
    run_coverage,
    run_pivot_uniformity,
    run_width_comparison,
)
from .truncnorm import PivotValue, TruncationRegion, tn_cdf, tn_interval_bounds, tn_pivot

__version__ = "0.1.0"

"""Iterated Ito stochastic integrals by multiple Fourier-Legendre series, and
the strong Taylor-Ito schemes of orders 1.5, 2.0 and 2.5 built on them."""

__version__ = "0.1.0"

from .coefficients import PATTERNS, CoeffTable, build_table, cbar, kernel_norm_sq, load_table, save_table
from .error_calc import ErrorBudget, IndexPattern, error_bound, exact_error, pair_errors, select_truncations
from .exceptions import (
    ConfigurationError,
    DivergenceError,
    InfeasibleTruncationError,
    ItoSeriesError,
    TableCompatibilityError,
    TableFormatError,
)
from .kernels import BACKEND
from .sampling import (
    GaussianPool,
    PathStreams,
    StepIntegrals,
    TruncationPlan,
    draw_pool,
    sample_multiple,
    sample_pair,
    sample_quad,
    sample_quint,
    sample_single,
    sample_step,
    sample_triple,
)
from .scheme import (
    PathState,
    SchemeConfig,
    SdeCoefficients,
    finite_difference_provider,
    run_path,
    step,
    symbolic_provider,
)
from .stratonovich import StratSample, sample_strat, triple_corrections, triple_error_terms

__all__ = [
    "PATTERNS", "CoeffTable", "build_table", "cbar", "kernel_norm_sq", "load_table", "save_table",
    "ErrorBudget", "IndexPattern", "error_bound", "exact_error", "pair_errors", "select_truncations",
    "ConfigurationError", "DivergenceError", "InfeasibleTruncationError", "ItoSeriesError",
    "TableCompatibilityError", "TableFormatError", "BACKEND",
    "GaussianPool", "PathStreams", "StepIntegrals", "TruncationPlan", "draw_pool", "sample_multiple",
    "sample_pair", "sample_quad", "sample_quint", "sample_single", "sample_step", "sample_triple",
    "PathState", "SchemeConfig", "SdeCoefficients", "finite_difference_provider", "run_path", "step",
    "symbolic_provider", "StratSample", "sample_strat", "triple_corrections", "triple_error_terms",
]

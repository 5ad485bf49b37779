"""Partial-correlation graph selection for multivariate time series."""

from .errors import ConfigError, ConvergenceError, DomainError, NotPositiveDefiniteError
from .fit import FitConfig, fit_constrained, fit_field, fit_single_missing
from .graph import Graph, edge_index_to_pair, is_correct_for, n_edges, pair_to_edge_index
from .kl import KlContext, TestRecord, all_single_edge_statistics, ekl, z_statistic
from .selection import SelectionResult, holm_levels, matsuda_select, mht_select, stepwise_level
from .spectral import (
    SpectralMatrixField,
    WeightSequence,
    WindowConstants,
    cosine_weights,
    estimate_spectrum,
    periodogram,
    smooth,
    window_constants,
)
from .var import (
    SampleMatrix,
    VarModel,
    model_a,
    model_b,
    model_c,
    random_var_model,
    simulate,
    true_missing_edges,
    var_inverse_spectral_matrix,
    var_spectral_matrix,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

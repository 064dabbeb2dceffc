"""Sparse-grid collocation: knots, index sets, surrogate, Sobol indices."""

from .indexsets import (
    MultiIndexSet,
    combination_coefficients,
    make_index_set_aniso,
    make_index_set_explicit,
    make_index_set_iso,
)
from .knots import KnotFamily, parse_knots
from .sobol import SobolReport, pce_coefficients, saltelli_indices, sobol_indices
from .surrogate import (
    GridDesign,
    SparseGridSurrogate,
    build_surrogate,
    collocation_points,
    surrogate_from_values,
)

__all__ = [
    "GridDesign",
    "KnotFamily",
    "MultiIndexSet",
    "SobolReport",
    "SparseGridSurrogate",
    "build_surrogate",
    "collocation_points",
    "combination_coefficients",
    "make_index_set_aniso",
    "make_index_set_explicit",
    "make_index_set_iso",
    "parse_knots",
    "pce_coefficients",
    "saltelli_indices",
    "sobol_indices",
    "surrogate_from_values",
]

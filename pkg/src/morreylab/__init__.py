"""Numerical toolkit for weighted Morrey spaces on dyadic grids."""

__version__ = "0.1.0"

from .grid import (DyadicCube, DyadicGrid, GridFunction, GridSizeError, Weight,
                   WeightDomainError, build_grid, weight_from_power)
from .morrey import MorreyParams, morrey_norm, weak_morrey_norm
from .maximal import global_sharp, hl_maximal, local_sharp, powered_maximal
from .singular import hilbert, riesz
from .sparse import cz_sparse, lerner_decompose
from .weights import power_weight_classifier, weight_report

__all__ = [
    "DyadicCube", "DyadicGrid", "GridFunction", "GridSizeError", "Weight",
    "WeightDomainError", "build_grid", "weight_from_power", "MorreyParams",
    "morrey_norm", "weak_morrey_norm", "global_sharp", "hl_maximal",
    "local_sharp", "powered_maximal", "hilbert", "riesz", "cz_sparse",
    "lerner_decompose", "power_weight_classifier", "weight_report",
]

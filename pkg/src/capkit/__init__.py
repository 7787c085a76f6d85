"""Dyadic Hausdorff content, Choquet integrals and capacitary BMO on finite grids."""

from .grid import (DiscreteMeasure, DyadicCube, DyadicSet, FormatError, GridError,
                   GridFunction, RootCube, read_grid, restrict, write_grid)
from .content import dyadic_content, optimal_cover, spherical_bracket
from .choquet import choquet_integral, l1_norm
from .calculus import cz_decompose, maximal_function, melnikov_select
from .bmo import best_constant, jn_constants, jn_verify, seminorm_dyadic
from .potential import hutchinson_measure, morrey_norm, riesz_potential

__version__ = "0.1.0"

__all__ = [
    "DiscreteMeasure", "DyadicCube", "DyadicSet", "FormatError", "GridError", "GridFunction",
    "RootCube", "read_grid", "restrict", "write_grid", "dyadic_content", "optimal_cover",
    "spherical_bracket", "choquet_integral", "l1_norm", "cz_decompose", "maximal_function",
    "melnikov_select", "best_constant", "jn_constants", "jn_verify", "seminorm_dyadic",
    "hutchinson_measure", "morrey_norm", "riesz_potential",
]

"""slopelab: exact p-adic slope computations for overconvergent modular
forms of tame level 1, constant-slope radius bounds, and Gouvea-Mazur
multiplicity experiments."""

from .padic_core import NewtonPolygon, PadicScalar, Valuation, gauss_valuation, newton_polygon, val_int
from .upmatrix import (
    CharSeries,
    KatzBasisSpec,
    PrecisionInsufficient,
    certified_for_slope,
    classical_oracle,
    d_multiplicity,
)

__version__ = "0.1.0"

__all__ = [
    "CharSeries",
    "KatzBasisSpec",
    "NewtonPolygon",
    "PadicScalar",
    "PrecisionInsufficient",
    "Valuation",
    "certified_for_slope",
    "classical_oracle",
    "d_multiplicity",
    "gauss_valuation",
    "newton_polygon",
    "val_int",
]

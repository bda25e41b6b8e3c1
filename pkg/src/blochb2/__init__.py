"""Bekolle-Bonami weights, Bloch functions and integration operators on the unit disk."""

__version__ = "0.1.0"

from .carleson import Arc, BoxQuadrature, CarlesonSquare, DyadicTree, TopHalfTiling, box_average, dyadic_sup_scan
from .geometry import DiskPoint, MetricConvention, MobiusMap, StolzAngle, hyperbolic_distance, mobius_apply, pseudo_hyperbolic

__all__ = [
    "Arc",
    "BoxQuadrature",
    "CarlesonSquare",
    "DiskPoint",
    "DyadicTree",
    "MetricConvention",
    "MobiusMap",
    "StolzAngle",
    "TopHalfTiling",
    "box_average",
    "dyadic_sup_scan",
    "hyperbolic_distance",
    "mobius_apply",
    "pseudo_hyperbolic",
]

"""Staggered Lax-Friedrichs solver for isentropic gas flow in a closed tube
with time-periodic forcing, plus the invariant-region diagnostics and the
fixed-point search for time-periodic solutions."""

from .gas import GasParams, GasState, RiemannPair, SchemeConstants, derive_constants

__all__ = ["GasParams", "GasState", "RiemannPair", "SchemeConstants", "derive_constants"]
__version__ = "0.1.0"

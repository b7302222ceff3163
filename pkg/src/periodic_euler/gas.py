"""Pointwise algebra for the isentropic gas with pressure p(rho) = rho**gamma / gamma.

Every function accepts scalars or numpy arrays (broadcast elementwise) and
follows one vacuum convention: where rho is below ``VACUUM_FLOOR`` the
velocity, both Riemann invariants, both characteristic speeds, the energy
and its flux are all zero.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, DomainError

log = logging.getLogger(__name__)

VACUUM_FLOOR = 1e-300
GAMMA_MAX = 5.0 / 3.0


class GasState(NamedTuple):
    """Conserved pair; fields may be floats or equally shaped arrays."""

    rho: float | np.ndarray
    mom: float | np.ndarray


class RiemannPair(NamedTuple):
    z: float | np.ndarray
    w: float | np.ndarray


@dataclass(frozen=True)
class GasParams:
    gamma: float

    def __post_init__(self):
        if not np.isfinite(self.gamma) or self.gamma <= 1.0:
            raise ConfigError(f"gamma must exceed 1, got {self.gamma}")

    @property
    def theta(self) -> float:
        return (self.gamma - 1.0) / 2.0

    @property
    def in_standard_range(self) -> bool:
        """True for 1 < gamma <= 5/3, where the invariant-region theory applies."""
        return self.gamma <= GAMMA_MAX + 1e-15


@dataclass(frozen=True)
class SchemeConstants:
    M: float
    eps: float
    kappa: float
    K: float
    alpha: float
    rho_bar: float
    eta_bar: float


def _out(x):
    x = np.asarray(x, dtype=float)
    return x[()] if x.ndim == 0 else x


def _arr(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


def positive_power(x, exponent: float):
    """x**exponent via exp/log on positive entries; zero where x <= VACUUM_FLOOR."""
    x = _arr(x)
    pos = x > VACUUM_FLOOR
    safe = np.where(pos, x, 1.0)
    return _out(np.where(pos, np.exp(exponent * np.log(safe)), 0.0))


def _check_density(rho) -> np.ndarray:
    rho = _arr(rho)
    if np.any(rho < 0) or np.any(np.isnan(rho)):
        raise DomainError("density must be non-negative")
    return rho


def velocity(u: GasState):
    rho, m = _arr(u.rho), _arr(u.mom)
    pos = rho > VACUUM_FLOOR
    return _out(np.where(pos, m / np.where(pos, rho, 1.0), 0.0))


def pressure(rho, p: GasParams):
    rho = _check_density(rho)
    return _out(positive_power(rho, p.gamma) / p.gamma)


def momentum_flux(u: GasState, p: GasParams):
    """m**2/rho + p(rho), zero at vacuum."""
    v = _arr(velocity(u))
    return _out(_arr(u.mom) * v + _arr(pressure(u.rho, p)))


def invariants_of(u: GasState, p: GasParams) -> RiemannPair:
    rho = _check_density(u.rho)
    v = _arr(velocity(u))
    s = _arr(positive_power(rho, p.theta)) / p.theta
    return RiemannPair(_out(v - s), _out(v + s))


def state_of(pair: RiemannPair, p: GasParams) -> GasState:
    z, w = _arr(pair.z), _arr(pair.w)
    if np.any(w < z):
        raise DomainError("Riemann invariants must satisfy w >= z")
    rho = _arr(positive_power(p.theta * (w - z) / 2.0, 1.0 / p.theta))
    v = (w + z) / 2.0
    m = np.where(rho > VACUUM_FLOOR, rho * v, 0.0)
    rho = np.where(rho > VACUUM_FLOOR, rho, 0.0)
    return GasState(_out(rho), _out(m))


def eta_star(u: GasState, p: GasParams):
    """Mechanical energy density m**2/(2 rho) + rho**gamma/(gamma(gamma-1))."""
    rho = _arr(u.rho)
    v = _arr(velocity(u))
    g = p.gamma
    return _out(0.5 * _arr(u.mom) * v + _arr(positive_power(rho, g)) / (g * (g - 1.0)))


def q_star(u: GasState, p: GasParams):
    """Energy flux m (v**2/2 + rho**(gamma-1)/(gamma-1))."""
    v = _arr(velocity(u))
    g = p.gamma
    return _out(_arr(u.mom) * (0.5 * v * v + _arr(positive_power(u.rho, g - 1.0)) / (g - 1.0)))


def zeta(u: GasState, c: SchemeConstants, p: GasParams):
    return _out(_arr(eta_star(u, p)) - c.alpha * _arr(u.rho) + c.K)


def v_weight(u: GasState, c: SchemeConstants, p: GasParams):
    return _out(_arr(q_star(u, p)) - c.alpha * _arr(u.mom))


def char_speeds(u: GasState, p: GasParams):
    v = _arr(velocity(u))
    c = _arr(positive_power(u.rho, p.theta))
    return _out(v - c), _out(v + c)


def g_sources(u: GasState, c: SchemeConstants, p: GasParams, force=0.0, force_moment=0.0):
    """Source terms of the z- and w-equations after the zeta shift.

    ``force`` is F at the point and ``force_moment`` the integral of F*m from
    the left wall up to the point.
    """
    g, th = p.gamma, p.theta
    rho = _arr(u.rho)
    v = _arr(velocity(u))
    lam1, lam2 = char_speeds(u, p)
    top = _arr(positive_power(rho, g + th)) / (g * (g - 1.0))
    mid = _arr(positive_power(rho, g)) * v / g
    kin = 0.5 * _arr(positive_power(rho, th + 1.0)) * v * v
    well = c.alpha * _arr(positive_power(rho, th + 1.0))
    tail = _arr(force) - _arr(force_moment)
    g1 = -c.K * _arr(lam1) + top + mid + kin - well + tail
    g2 = -c.K * _arr(lam2) - top + mid - kin + well + tail
    return _out(g1), _out(g2)


def k_exponent(p: GasParams) -> float:
    return 2.0 * (p.gamma - 1.0) / (p.gamma + 1.0)


def derive_constants(M: float, eps: float, rho_bar: float, eta_bar: float, p: GasParams,
                     kappa: float = 0.0) -> SchemeConstants:
    top = k_exponent(p)
    if not 0.0 < eps < top:
        raise ConfigError(f"eps must lie in (0, {top:.6g}) for gamma={p.gamma}, got {eps}")
    if not M > 0:
        raise ConfigError(f"M must be positive, got {M}")
    if not rho_bar > 0:
        raise ConfigError(f"total mass must be positive, got {rho_bar}")
    if eta_bar < 0:
        raise ConfigError(f"total energy must be non-negative, got {eta_bar}")
    if kappa < 0:
        raise ConfigError(f"kappa must be non-negative, got {kappa}")
    K = M ** (top - eps)
    alpha = (K + eta_bar + 1.0) / rho_bar
    return SchemeConstants(M=M, eps=eps, kappa=kappa, K=K, alpha=alpha,
                           rho_bar=rho_bar, eta_bar=eta_bar)


def eta_gradient(u: GasState, p: GasParams):
    """Gradient of eta_star in the conserved variables (rho, m)."""
    v = _arr(velocity(u))
    d_rho = -0.5 * v * v + _arr(positive_power(u.rho, p.gamma - 1.0)) / (p.gamma - 1.0)
    return _out(d_rho), _out(v)


def eta_hessian(u: GasState, p: GasParams):
    """Hessian entries (h_rr, h_rm, h_mm) of eta_star; zero at vacuum."""
    rho = _arr(u.rho)
    pos = rho > VACUUM_FLOOR
    inv = np.where(pos, 1.0 / np.where(pos, rho, 1.0), 0.0)
    v = _arr(velocity(u))
    h_rr = v * v * inv + _arr(positive_power(rho, p.gamma - 2.0)) * pos
    return _out(h_rr), _out(-v * inv), _out(inv)

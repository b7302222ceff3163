"""Period map in zeta-shifted invariants and its damped Picard fixed point.

A profile on J_0 is encoded by zhat = z - I and what = w - I, where I is the
running integral of zeta. Density depends only on what - zhat; velocity is
recovered cell by cell from the left wall because I_j depends on v_j itself.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .bounds import i_functional
from .errors import ConfigError, DivergenceError, DomainError, ReconstructionError
from .gas import VACUUM_FLOOR, GasParams, SchemeConstants, invariants_of, positive_power
from .mesh import GridSpec, StaggeredProfile
from .scheme import StepperConfig, run_period

log = logging.getLogger(__name__)

DIVERGENCE_WINDOW = 20
DIVERGENCE_FACTOR = 10.0


@dataclass(frozen=True)
class ShiftedState:
    zhat: np.ndarray
    what: np.ndarray

    def __post_init__(self):
        z = np.array(self.zhat, dtype=float)
        w = np.array(self.what, dtype=float)
        if z.shape != w.shape or z.ndim != 1:
            raise DomainError("zhat and what must be 1-d arrays of equal length")
        object.__setattr__(self, "zhat", z)
        object.__setattr__(self, "what", w)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.zhat, self.what])

    @classmethod
    def from_vector(cls, vec) -> "ShiftedState":
        vec = np.asarray(vec, dtype=float)
        half = len(vec) // 2
        return cls(vec[:half], vec[half:])

    @property
    def admissible(self) -> bool:
        return bool(np.all(self.what >= self.zhat))


def to_shifted(profile: StaggeredProfile, c: SchemeConstants, p: GasParams) -> ShiftedState:
    if profile.n % 2:
        raise DomainError(f"shifted coordinates live on even levels, got n={profile.n}")
    I = i_functional(profile, c, p)
    z, w = invariants_of(profile.state, p)
    return ShiftedState(np.asarray(z) - I, np.asarray(w) - I)


def _solve_velocities(s: ShiftedState, c: SchemeConstants, grid: GridSpec, p: GasParams):
    """Density and velocity per cell plus the quadratic coefficient a_j."""
    if not s.admissible:
        bad = int(np.argmax(s.what < s.zhat))
        raise ReconstructionError(f"what < zhat at position {bad}", index=bad)
    th, g = p.theta, p.gamma
    rho = np.asarray(positive_power(th * (s.what - s.zhat) / 2.0, 1.0 / th)) * np.ones(len(s.zhat))
    rho = np.where(rho > VACUUM_FLOOR, rho, 0.0)
    widths = grid.widths(0)
    if len(widths) != len(rho):
        raise DomainError(f"expected {len(widths)} cells, got {len(rho)}")
    # zeta without its kinetic part
    rest = np.asarray(positive_power(rho, g)) / (g * (g - 1.0)) - c.alpha * rho + c.K
    v = np.zeros_like(rho)
    a = 0.5 * widths * rho / 2.0
    prefix = 0.0
    for k in range(len(rho)):
        b = 0.5 * (s.what[k] + s.zhat[k]) + prefix + 0.5 * widths[k] * rest[k]
        if rho[k] == 0.0:
            vk = 0.0
        else:
            disc = 1.0 - 4.0 * a[k] * b
            if disc < 0:
                raise ReconstructionError(
                    f"no real velocity in cell {k} (discriminant {disc:.3e})", index=k)
            vk = 2.0 * b / (1.0 + np.sqrt(disc))
        v[k] = vk
        prefix += widths[k] * (0.5 * rho[k] * vk * vk + rest[k])
    return rho, v, a


def from_shifted(s: ShiftedState, c: SchemeConstants, grid: GridSpec, p: GasParams,
                 n: int = 0) -> StaggeredProfile:
    rho, v, _a = _solve_velocities(s, c, grid, p)
    return StaggeredProfile(n, rho, np.where(rho > 0, rho * v, 0.0), grid)


def velocity_contraction(s: ShiftedState, c: SchemeConstants, grid: GridSpec,
                         p: GasParams) -> float:
    """max_j a_j |v_j| at the selected roots; below 1 the per-cell solve is a contraction."""
    _rho, v, a = _solve_velocities(s, c, grid, p)
    return float(np.max(a * np.abs(v))) if len(v) else 0.0


def _lean(config: StepperConfig) -> StepperConfig:
    # the map needs only the states, not the remainder bookkeeping
    return replace(config, track_remainders=False)


def F_map(s: ShiftedState, config: StepperConfig, periods: int = 1) -> ShiftedState:
    grid, c, p = config.grid, config.constants, config.gas
    start = from_shifted(s, c, grid, p)
    res = run_period(start, _lean(config), steps=periods * grid.steps_per_period, record=False)
    return to_shifted(res.final, c, p)


def periodicity_residual(p0: StaggeredProfile, p1: StaggeredProfile) -> tuple[float, float]:
    """(L1, sup) of the componentwise difference of two profiles of equal parity."""
    if p0.grid != p1.grid or (p0.n - p1.n) % 2:
        raise DomainError("profiles live on different grids or parities")
    d_rho = np.abs(p1.rho - p0.rho)
    d_mom = np.abs(p1.mom - p0.mom)
    l1 = float(np.sum(p0.widths * (d_rho + d_mom)))
    sup = float(max(d_rho.max(), d_mom.max())) if len(d_rho) else 0.0
    return l1, sup


def _shifted_l1(diff: np.ndarray, widths: np.ndarray) -> float:
    half = len(diff) // 2
    return float(np.sum(widths * (np.abs(diff[:half]) + np.abs(diff[half:]))))


@dataclass
class FixedPointReport:
    iterations: int = 0
    residual_sup: list[float] = field(default_factory=list)
    residual_l1: list[float] = field(default_factory=list)
    converged: bool = False
    diverged: bool = False
    certificate: float | None = None
    periodicity_l1: float | None = None
    periodicity_sup: float | None = None
    contraction: float | None = None
    message: str = ""

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def default_guess(config: StepperConfig) -> ShiftedState:
    """Shifted image of the equilibrium (rho_bar, 0)."""
    grid, c = config.grid, config.constants
    k = len(grid.indices(0))
    rest = StaggeredProfile(0, np.full(k, c.rho_bar), np.zeros(k), grid)
    return to_shifted(rest, c, config.gas)


def find_fixed_point(guess: ShiftedState, config: StepperConfig, tol: float = 1e-8,
                     max_iter: int = 200, damping: float = 0.5):
    """Damped Picard iteration x <- (1 - damping) x + damping F(x).

    Returns (x, report). The iteration count equals the number of F
    evaluations and the residual history has one entry per evaluation.
    Raises DivergenceError when the sup residual grows tenfold over 20 iterates.
    """
    if not 0.0 < damping <= 1.0:
        raise ConfigError(f"damping must lie in (0, 1], got {damping}")
    if max_iter < 0:
        raise ConfigError("max_iter must be non-negative")
    grid, c, p = config.grid, config.constants, config.gas
    widths = grid.widths(0)
    report = FixedPointReport()
    x = guess.as_vector()
    for it in range(max_iter):
        fx = F_map(ShiftedState.from_vector(x), config).as_vector()
        diff = fx - x
        sup = float(np.max(np.abs(diff)))
        report.iterations = it + 1
        report.residual_sup.append(sup)
        report.residual_l1.append(_shifted_l1(diff, widths))
        log.info("picard iterate %d: sup residual %.3e", it + 1, sup)
        if sup < tol:
            report.converged = True
            break
        if (len(report.residual_sup) > DIVERGENCE_WINDOW and
                sup > DIVERGENCE_FACTOR * report.residual_sup[-1 - DIVERGENCE_WINDOW]):
            report.diverged = True
            report.message = f"residual grew from {report.residual_sup[-1 - DIVERGENCE_WINDOW]:.3e} to {sup:.3e}"
            raise DivergenceError(report.message, history=report.residual_sup, report=report)
        x = (1.0 - damping) * x + damping * fx
    xs = ShiftedState.from_vector(x)
    if report.converged:
        # one fresh period from the returned point, independent of the loop
        u0 = from_shifted(xs, c, grid, p)
        u1 = run_period(u0, _lean(config), record=False).final
        report.certificate = float(np.max(np.abs(to_shifted(u1, c, p).as_vector() - x)))
        report.periodicity_l1, report.periodicity_sup = periodicity_residual(u0, u1)
        report.contraction = velocity_contraction(xs, c, grid, p)
    elif not report.message:
        report.message = f"no convergence within {max_iter} iterates"
    return xs, report


HISTORY_HEADER = ["iter", "residual_sup", "residual_l1"]


def write_history(path, report: FixedPointReport) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_HEADER)
        for k, (s, l1) in enumerate(zip(report.residual_sup, report.residual_l1), start=1):
            writer.writerow([k, repr(s), repr(l1)])
    return path

"""Staggered grid, cell averages, piecewise-constant fields and forcing."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import ConfigError, DomainError
from .gas import GasParams, GasState, eta_star

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class GridSpec:
    """Mesh on [0, 1] with dx = 1/(2 Nx) and dt locked by dx/dt = floor(2M) + 1."""

    Nx: int
    M: float
    cfl_den: int
    Nt: int
    dx: float
    dt: float

    @property
    def steps_per_period(self) -> int:
        return 2 * self.Nt

    def x(self, j):
        return np.asarray(j, dtype=float) * self.dx

    def t(self, n: int) -> float:
        return n * self.dt

    def indices(self, n: int) -> np.ndarray:
        """J_n: the k in 0..2Nx with k + n odd."""
        return np.arange(1 if n % 2 == 0 else 0, 2 * self.Nx + 1, 2)

    def widths(self, n: int) -> np.ndarray:
        w = np.full(len(self.indices(n)), 2.0 * self.dx)
        if n % 2 == 1:
            w[0] = w[-1] = self.dx
        return w

    def cell_bounds(self, j: int) -> tuple[float, float]:
        return max(j - 1, 0) * self.dx, min(j + 1, 2 * self.Nx) * self.dx

    def decay(self, n: int) -> float:
        return self.M * (1.0 - self.dt / 4.0) ** n


def build_grid(Nx: int, M: float) -> GridSpec:
    if int(Nx) != Nx or Nx < 2:
        raise ConfigError(f"Nx must be an integer >= 2, got {Nx}")
    if not M > 0:
        raise ConfigError(f"M must be positive, got {M}")
    Nx = int(Nx)
    cfl_den = math.floor(2 * M) + 1
    Nt = Nx * cfl_den
    return GridSpec(Nx=Nx, M=float(M), cfl_den=cfl_den, Nt=Nt,
                    dx=1.0 / (2 * Nx), dt=1.0 / (2 * Nt))


@dataclass(frozen=True)
class StaggeredProfile:
    """Cell values on J_n; at odd n the first and last entries are boundary half-cells."""

    n: int
    rho: np.ndarray
    mom: np.ndarray
    grid: GridSpec

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float)
        mom = np.array(self.mom, dtype=float)
        expected = len(self.grid.indices(self.n))
        if rho.shape != (expected,) or mom.shape != (expected,):
            raise DomainError(f"profile at n={self.n} needs {expected} values, got {rho.shape}")
        if np.any(rho < 0) or not np.all(np.isfinite(rho)) or not np.all(np.isfinite(mom)):
            raise DomainError(f"profile at n={self.n} has negative or non-finite entries")
        rho.setflags(write=False)
        mom.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "mom", mom)

    @property
    def indices(self) -> np.ndarray:
        return self.grid.indices(self.n)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x(self.indices)

    @property
    def widths(self) -> np.ndarray:
        return self.grid.widths(self.n)

    @property
    def t(self) -> float:
        return self.grid.t(self.n)

    @property
    def state(self) -> GasState:
        return GasState(self.rho, self.mom)

    def mass(self) -> float:
        return float(np.sum(self.widths * self.rho))

    def energy(self, p: GasParams) -> float:
        return float(np.sum(self.widths * eta_star(self.state, p)))

    def value_at(self, j: int) -> GasState:
        where = np.flatnonzero(self.indices == j)
        if where.size == 0:
            raise IndexError(f"index {j} is not in J_{self.n}")
        k = where[0]
        return GasState(float(self.rho[k]), float(self.mom[k]))


@dataclass(frozen=True)
class PiecewiseConstantField:
    """u(x) = values[i] on [edges[i], edges[i+1])."""

    edges: np.ndarray
    rho: np.ndarray
    mom: np.ndarray

    def __call__(self, x) -> GasState:
        x = np.asarray(x, dtype=float)
        k = np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, len(self.rho) - 1)
        return GasState(self.rho[k], self.mom[k])

    def integrate(self, a: float, b: float) -> GasState:
        lo = np.clip(self.edges[:-1], a, b)
        hi = np.clip(self.edges[1:], a, b)
        overlap = hi - lo
        return GasState(float(overlap @ self.rho), float(overlap @ self.mom))


def cell_average(fld, j: int, n: int, grid: GridSpec) -> GasState:
    """Average of ``fld`` over the cell of index j at level n.

    ``fld`` is either a :class:`PiecewiseConstantField` (integrated exactly) or
    a vectorised callable x -> GasState (8-point Gauss-Legendre per half-cell).
    """
    if j not in set(grid.indices(n).tolist()):
        raise IndexError(f"index {j} is not in J_{n}")
    a, b = grid.cell_bounds(j)
    if hasattr(fld, "integrate"):
        total = fld.integrate(a, b)
        return GasState(total.rho / (b - a), total.mom / (b - a))
    mid = grid.x(j)
    pieces = [(lo, hi) for lo, hi in ((a, mid), (mid, b)) if hi > lo]
    r = m = 0.0
    for lo, hi in pieces:
        half = 0.5 * (hi - lo)
        xs = lo + half * (_GL_NODES + 1.0)
        u = fld(xs)
        r += half * float(_GL_WEIGHTS @ np.broadcast_to(u.rho, xs.shape))
        m += half * float(_GL_WEIGHTS @ np.broadcast_to(u.mom, xs.shape))
    return GasState(r / (b - a), m / (b - a))


def piecewise_reconstruct(profile: StaggeredProfile) -> PiecewiseConstantField:
    grid = profile.grid
    starts = [grid.cell_bounds(int(j))[0] for j in profile.indices]
    edges = np.array(starts + [1.0])
    return PiecewiseConstantField(edges, profile.rho.copy(), profile.mom.copy())


def project_initial(fld, grid: GridSpec) -> StaggeredProfile:
    """Cell averages of initial data over J_0."""
    avg = [cell_average(fld, int(j), 0, grid) for j in grid.indices(0)]
    rho = np.array([u.rho for u in avg])
    mom = np.array([u.mom for u in avg])
    return StaggeredProfile(0, np.maximum(rho, 0.0), mom, grid)


# -- forcing -------------------------------------------------------------------

SHAPES: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sin_pi": lambda x: np.sin(np.pi * x),
    "sin_2pi": lambda x: np.sin(2 * np.pi * x),
    "one": lambda x: np.ones_like(x),
    "zero": lambda x: np.zeros_like(x),
}


@dataclass(frozen=True)
class ForcingField:
    """Outer force F(x, t), periodic in t with period 1."""

    kind: str
    evaluator: Callable = field(repr=False)
    bound: float = 0.0

    def __call__(self, x, t):
        return self.evaluator(np.asarray(x, dtype=float), np.mod(t, 1.0))

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    def sup_norm(self, samples: int = 201) -> float:
        xs = np.linspace(0.0, 1.0, samples)
        return max(float(np.max(np.abs(self(xs, t)))) for t in np.linspace(0.0, 1.0, samples))


def zero_forcing() -> ForcingField:
    return ForcingField("zero", lambda x, t: np.zeros_like(x), 0.0)


def sinusoidal_forcing(kappa: float, shape: str = "sin_pi") -> ForcingField:
    """F(x, t) = kappa sin(2 pi t) s(x) with sup |s| = 1."""
    if kappa < 0:
        raise ConfigError("kappa must be non-negative")
    if shape not in SHAPES:
        raise ConfigError(f"unknown forcing shape {shape!r}; choose from {sorted(SHAPES)}")
    s = SHAPES[shape]
    if kappa == 0 or shape == "zero":
        return zero_forcing()
    return ForcingField("sinusoidal", lambda x, t: kappa * np.sin(2 * np.pi * t) * s(x), kappa)


def callable_forcing(func: Callable, bound: float | None = None) -> ForcingField:
    """Wrap an arbitrary F(x, t); the caller is responsible for periodicity."""
    return ForcingField("custom", func, float(bound) if bound is not None else float("nan"))


def tabulated_forcing(t_nodes, x_nodes, values) -> ForcingField:
    t_nodes = np.asarray(t_nodes, dtype=float)
    x_nodes = np.asarray(x_nodes, dtype=float)
    values = np.array(values, dtype=float)
    if values.shape != (len(t_nodes), len(x_nodes)):
        raise ConfigError("forcing table is not rectangular")
    if t_nodes[0] != 0.0 or t_nodes[-1] != 1.0:
        raise ConfigError("forcing table must span t = 0 to t = 1")
    if not np.array_equal(values[0], values[-1]):
        raise ConfigError("forcing table rows at t = 0 and t = 1 differ")
    interp = RegularGridInterpolator((t_nodes, x_nodes), values, method="linear",
                                     bounds_error=False, fill_value=None)

    def evaluate(x, t):
        x = np.clip(np.asarray(x, dtype=float), x_nodes[0], x_nodes[-1])
        tt = np.broadcast_to(t, x.shape)
        return interp(np.stack([tt, x], axis=-1))

    return ForcingField("tabulated", evaluate, float(np.max(np.abs(values))))


def _read_rows(path: Path, header: list[str]) -> list[list[float]]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or [h.strip() for h in first] != header:
            raise ConfigError(f"{path}: expected header {','.join(header)}")
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ConfigError(f"{path}:{line_no}: expected {len(header)} columns")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise ConfigError(f"{path}:{line_no}: {exc}") from exc
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    return rows


def read_forcing_csv(path) -> ForcingField:
    rows = np.array(_read_rows(path, ["t", "x", "F"]))
    t_nodes = np.unique(rows[:, 0])
    x_nodes = np.unique(rows[:, 1])
    if len(rows) != len(t_nodes) * len(x_nodes):
        raise ConfigError(f"{path}: forcing samples do not form a rectangular grid")
    order = np.lexsort((rows[:, 1], rows[:, 0]))
    values = rows[order, 2].reshape(len(t_nodes), len(x_nodes))
    return tabulated_forcing(t_nodes, x_nodes, values)


def read_initial_csv(path) -> Callable[[np.ndarray], GasState]:
    """Initial data "x,rho,v" as a piecewise-linear function of x."""
    rows = np.array(_read_rows(path, ["x", "rho", "v"]))
    order = np.argsort(rows[:, 0])
    xs, rho, v = rows[order, 0], rows[order, 1], rows[order, 2]
    if np.any(rho < 0):
        raise ConfigError(f"{path}: negative density in initial data")

    def u0(x):
        r = np.interp(x, xs, rho)
        return GasState(r, r * np.interp(x, xs, v))

    return u0

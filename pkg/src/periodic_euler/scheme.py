"""Time stepper: staggered Lax-Friedrichs recurrence with zeta-weighted corrections.

One step maps values on J_n to values on J_{n+1}. Each new cell average is
built from its two neighbours at level n,

    rho_j <- (rho_{j+1} + rho_{j-1})/2 - dt/(2dx) (m_{j+1} - m_{j-1}) - R_{j+1} + R_{j-1}
    m_j   <- (m_{j+1} + m_{j-1})/2 - dt/(2dx) (Phi_{j+1} - Phi_{j-1}) - S_{j+1} + S_{j-1}
             + dt (rho_{j+1} + rho_{j-1})/2 F(x_j, t_n)

with Phi = m^2/rho + p(rho). Wall cells see a mirrored ghost neighbour.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bounds
from .bounds import BoundState
from .errors import ConfigError, DomainError, NumericalError
from .gas import (VACUUM_FLOOR, GasParams, GasState, SchemeConstants, eta_star, g_sources,
                  invariants_of, momentum_flux, positive_power, v_weight, velocity, zeta)
from .mesh import ForcingField, GridSpec, StaggeredProfile
from .riemann import FanParams, shock_entropy_batch

log = logging.getLogger(__name__)

RAW = "raw"
CUTOFF = "cutoff"


@dataclass(frozen=True)
class StepperConfig:
    mode: str
    forcing: ForcingField
    constants: SchemeConstants
    gas: GasParams
    grid: GridSpec
    fan: FanParams = field(default_factory=FanParams)
    track_shocks: bool | None = None
    track_remainders: bool = True
    max_clamps: int = 100
    c_tol: float = bounds.DEFAULT_C_TOL

    def __post_init__(self):
        if self.mode not in (RAW, CUTOFF):
            raise ValueError(f"mode must be {RAW!r} or {CUTOFF!r}")
        if self.mode == CUTOFF:
            object.__setattr__(self, "fan", self.fan.validate(self.gas))

    @property
    def shocks_tracked(self) -> bool:
        return self.mode == CUTOFF if self.track_shocks is None else self.track_shocks

    @property
    def delta(self) -> float:
        return self.fan.resolved_delta(self.gas)


@dataclass
class StepArtifacts:
    n: int
    dt: float
    M_next: float
    averaged: GasState
    half_left: GasState
    half_right: GasState
    jensen_gap: np.ndarray
    weighted_remainder: np.ndarray
    shock_entropy: np.ndarray
    I_next: np.ndarray
    work: float
    clamp_indices: np.ndarray
    cutoff_indices: np.ndarray
    vacuum_indices: np.ndarray
    pre_cutoff: bounds.ContainmentReport | None = None


def xi_k(profile: StaggeredProfile, k: int, grid: GridSpec, p: GasParams) -> float:
    """Mass-moment increment between the neighbouring indices k and k+2 of J_n."""
    a, b = profile.value_at(k), profile.value_at(k + 2)
    flux_b = float(momentum_flux(b, p))
    flux_a = float(momentum_flux(a, p))
    return (b.mom + a.mom) * grid.dx - (2.0 * grid.dt / 3.0) * (flux_b - flux_a)


def _xi_all(rho, mom, flux, grid: GridSpec):
    return (mom[1:] + mom[:-1]) * grid.dx - (2.0 * grid.dt / 3.0) * (flux[1:] - flux[:-1])


def _gh_arrays(rho, mom, x, t_n, forcing: ForcingField, c: SchemeConstants, p: GasParams,
               grid: GridSpec):
    u = GasState(rho, mom)
    flux = np.asarray(momentum_flux(u, p))
    xi = _xi_all(rho, mom, flux, grid)
    f_mid = np.asarray(forcing(x[:-1] + grid.dx, t_n), dtype=float) * np.ones(len(x) - 1)
    moment = np.concatenate(([0.0], np.cumsum(f_mid * xi)))
    f_here = np.asarray(forcing(x, t_n), dtype=float) * np.ones(len(x))
    G, H = g_sources(u, c, p, force=f_here, force_moment=moment)
    return np.asarray(G), np.asarray(H), flux


def gh_terms(profile: StaggeredProfile, j: int, forcing: ForcingField, c: SchemeConstants,
             p: GasParams) -> tuple[float, float]:
    """(G_j, H_j) at level n, with F sampled at t_n."""
    G, H, _ = _gh_arrays(profile.rho, profile.mom, profile.x, profile.t, forcing, c, p,
                         profile.grid)
    k = int(np.flatnonzero(profile.indices == j)[0])
    return float(G[k]), float(H[k])


def _rs_arrays(rho, mom, G, H, c: SchemeConstants, p: GasParams, grid: GridSpec):
    th = p.theta
    u = GasState(rho, mom)
    pos = rho > VACUUM_FLOOR
    inv_th = np.where(pos, 1.0 / np.where(pos, np.asarray(positive_power(rho, th)), 1.0), 0.0)
    v = np.asarray(velocity(u))
    coef = grid.dt ** 2 / (8.0 * grid.dx)
    R = coef * (rho * (H + G) + mom * inv_th * (H - G))
    pressure_like = (rho * v * v + np.asarray(positive_power(rho, p.gamma))) * inv_th
    S = (grid.dx / 4.0) * rho * np.asarray(zeta(u, c, p)) + coef * (
        2.0 * rho * (H + G + 2.0 * np.asarray(v_weight(u, c, p)))
        + pressure_like * (H - G) - 2.0 * mom)
    R = np.where(pos, R, 0.0)
    S = np.where(pos, S, 0.0)
    return R, S


def rs_corrections(profile: StaggeredProfile, j: int, forcing: ForcingField, c: SchemeConstants,
                   p: GasParams) -> tuple[float, float]:
    G, H, _ = _gh_arrays(profile.rho, profile.mom, profile.x, profile.t, forcing, c, p,
                         profile.grid)
    R, S = _rs_arrays(profile.rho, profile.mom, G, H, c, p, profile.grid)
    k = int(np.flatnonzero(profile.indices == j)[0])
    return float(R[k]), float(S[k])


def _neighbours(arr, n: int, ghost_sign: float):
    """Left/right neighbour arrays for the cells of level n+1.

    From an even level the wall cells of level n+1 see a mirrored ghost whose
    value is ``ghost_sign`` times the adjacent interior value.
    """
    if n % 2 == 0:
        ext = np.concatenate(([ghost_sign * arr[0]], arr, [ghost_sign * arr[-1]]))
        return ext[:-1], ext[1:]
    return arr[:-1], arr[1:]


def step(profile: StaggeredProfile, config: StepperConfig, bound: BoundState | None = None):
    """Advance one time level. Returns (profile at n+1, StepArtifacts)."""
    grid, p, c, forcing = config.grid, config.gas, config.constants, config.forcing
    n = profile.n
    t_n = grid.t(n)
    dx, dt = grid.dx, grid.dt
    rho, mom = profile.rho, profile.mom

    G, H, flux = _gh_arrays(rho, mom, profile.x, t_n, forcing, c, p, grid)
    R, S = _rs_arrays(rho, mom, G, H, c, p, grid)

    rL, rR = _neighbours(rho, n, 1.0)
    mL, mR = _neighbours(mom, n, -1.0)
    fL, fR = _neighbours(flux, n, 1.0)
    RL, RR = _neighbours(R, n, -1.0)
    SL, SR = _neighbours(S, n, 1.0)

    new_idx = grid.indices(n + 1)
    x_new = grid.x(new_idx)
    f_new = np.asarray(forcing(x_new, t_n), dtype=float) * np.ones(len(x_new))
    lam = dt / (2.0 * dx)
    rho_avg = 0.5 * (rR + rL) - lam * (mR - mL) - RR + RL
    mom_avg = 0.5 * (mR + mL) - lam * (fR - fL) - SR + SL + dt * 0.5 * (rR + rL) * f_new

    # pre-averaging field: the two half-cell states shifted by a common increment
    d_rho = rho_avg - 0.5 * (rL + rR)
    d_mom = mom_avg - 0.5 * (mL + mR)
    half_left = GasState(rL + d_rho, mL + d_mom)
    half_right = GasState(rR + d_rho, mR + d_mom)
    widths = grid.widths(n + 1)
    phys_left = np.ones(len(new_idx))
    phys_right = np.ones(len(new_idx))
    if n % 2 == 0:
        phys_left[0] = 0.0
        phys_right[-1] = 0.0

    clamp = rho_avg < 0
    averaged = GasState(rho_avg.copy(), mom_avg.copy())
    rho_new = np.where(clamp, 0.0, rho_avg)
    mom_new = np.where(clamp, 0.0, mom_avg)
    rho_new = np.where(rho_new > VACUUM_FLOOR, rho_new, 0.0)
    mom_new = np.where(rho_new > 0.0, mom_new, 0.0)

    halves_ok = (half_left.rho >= 0) & (half_right.rho >= 0) & ~clamp
    jensen = np.zeros(len(new_idx))
    if np.any(halves_ok):
        e_l = np.asarray(eta_star(GasState(np.where(halves_ok, half_left.rho, 0.0),
                                           np.where(halves_ok, half_left.mom, 0.0)), p))
        e_r = np.asarray(eta_star(GasState(np.where(halves_ok, half_right.rho, 0.0),
                                           np.where(halves_ok, half_right.mom, 0.0)), p))
        e_c = np.asarray(eta_star(GasState(rho_new, mom_new), p))
        jensen = np.where(halves_ok, 0.5 * widths * (e_l + e_r) - widths * e_c, 0.0)

    if config.shocks_tracked:
        e1, e2 = shock_entropy_batch(rL, mL, rR, mR, p)
        shock = e1 * phys_left + e2 * phys_right
    else:
        shock = np.zeros(len(new_idx))

    M_next = bounds.decay_bound(c.M, dt, n + 1)
    cut_idx = np.array([], dtype=int)
    vac_idx = np.array([], dtype=int)
    pre_report = None
    if config.mode == CUTOFF:
        I_pre = bounds.i_values(rho_new, mom_new, widths, c, p)
        L_now = 0.0 if bound is None else bound.L
        L_now += dt * float(np.sum(shock)) + float(np.sum(jensen))
        z, w = invariants_of(GasState(rho_new, mom_new), p)
        lower = np.asarray(z) - (-M_next - L_now + I_pre)
        upper = (M_next + L_now + I_pre) - np.asarray(w)
        pre_report = bounds.ContainmentReport(n + 1, new_idx, lower, upper,
                                              bounds.tolerance(dx, config.c_tol))
        r_c, m_c, clamped, thin, crossed = bounds.cutoff_arrays(
            rho_avg, mom_avg, M_next, L_now, I_pre, dx, config.delta, p)
        cut_idx = new_idx[clamped]
        vac_idx = new_idx[thin | crossed]
        rho_new, mom_new = r_c, m_c
        I_next = I_pre
    else:
        I_next = bounds.i_values(rho_new, mom_new, widths, c, p)

    if config.track_remainders:
        centre = GasState(rho_new, mom_new)
        rem_l = bounds.taylor_remainder(GasState(np.maximum(half_left.rho, 0.0), half_left.mom),
                                        centre, p)
        rem_r = bounds.taylor_remainder(GasState(np.maximum(half_right.rho, 0.0), half_right.mom),
                                        centre, p)
        weighted = dx * (0.75 * rem_l * phys_left + 0.25 * rem_r * phys_right)
        weighted = np.where(halves_ok, weighted, 0.0)
    else:
        weighted = np.zeros(len(new_idx))

    work = dt * float(np.sum(profile.widths * np.asarray(forcing(profile.x, t_n)) * mom))
    new_profile = StaggeredProfile(n + 1, rho_new, mom_new, grid)
    art = StepArtifacts(n=n, dt=dt, M_next=M_next, averaged=averaged,
                        half_left=half_left, half_right=half_right,
                        jensen_gap=jensen, weighted_remainder=weighted,
                        shock_entropy=shock, I_next=I_next, work=work,
                        clamp_indices=new_idx[clamp], cutoff_indices=cut_idx,
                        vacuum_indices=vac_idx, pre_cutoff=pre_report)
    return new_profile, art


@dataclass
class RunResult:
    final: StaggeredProfile
    trajectory: list[StaggeredProfile]
    bound: BoundState
    diagnostics: dict


def run_period(initial: StaggeredProfile, config: StepperConfig, steps: int | None = None,
               stride: int = 1, record: bool = True, bound: BoundState | None = None) -> RunResult:
    """Apply ``steps`` (default 2Nt, one period) steps of the recurrence."""
    grid, c, p = config.grid, config.constants, config.gas
    if steps is None:
        steps = grid.steps_per_period
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if bound is None:
        bound = BoundState.initial(initial, c, p)
    profile = initial
    trajectory = [initial] if record else []
    series = {"n": [bound.n], "L_shock": [0.0], "L_jensen": [0.0], "L_remainder": [0.0],
              "M_n": [bound.M_n]}
    clamps: list[tuple[int, int]] = []
    cutoffs = 0
    vacuum_cuts = 0
    worst_pre = []
    for _ in range(steps):
        profile, art = step(profile, config, bound)
        bound = bounds.l_update(bound, art)
        for j in art.clamp_indices:
            clamps.append((profile.n, int(j)))
        if config.mode == RAW and len(clamps) > config.max_clamps:
            raise NumericalError(
                f"negative density clamped {len(clamps)} times (limit {config.max_clamps}); "
                f"last at n={clamps[-1][0]}, j={clamps[-1][1]}")
        cutoffs += len(art.cutoff_indices)
        vacuum_cuts += len(art.vacuum_indices)
        if art.pre_cutoff is not None:
            worst_pre.append(art.pre_cutoff.worst)
        if profile.n % stride == 0 or profile.n == initial.n + steps:
            series["n"].append(profile.n)
            series["L_shock"].append(bound.L_shock)
            series["L_jensen"].append(bound.L_jensen)
            series["L_remainder"].append(bound.L_remainder)
            series["M_n"].append(bound.M_n)
            if record:
                trajectory.append(profile)
    diagnostics = {
        "accumulators": series,
        "clamp_events": [list(e) for e in clamps],
        "cutoff_events": cutoffs,
        "vacuum_cutoffs": vacuum_cuts,
    }
    if worst_pre:
        diagnostics["pre_cutoff_worst_slack"] = worst_pre
    return RunResult(profile, trajectory, bound, diagnostics)


TRAJECTORY_HEADER = ["n", "t", "j", "x", "rho", "m", "v", "z", "w"]


def trajectory_rows(profiles, p: GasParams):
    for pr in profiles:
        v = np.asarray(velocity(pr.state))
        z, w = invariants_of(pr.state, p)
        z, w = np.atleast_1d(z), np.atleast_1d(w)
        for k, j in enumerate(pr.indices):
            yield [pr.n, repr(pr.t), int(j), repr(float(pr.grid.x(j))), repr(float(pr.rho[k])),
                   repr(float(pr.mom[k])), repr(float(v[k])), repr(float(z[k])),
                   repr(float(w[k]))]


def write_trajectory(path, profiles, p: GasParams) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_HEADER)
        for row in trajectory_rows(profiles, p):
            writer.writerow(row)
    return path


def read_trajectory(path, grid: GridSpec) -> list[StaggeredProfile]:
    """Inverse of :func:`write_trajectory`; rows of each level must cover J_n in order."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"trajectory not found: {path}")
    levels: dict[int, tuple[list, list, list]] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != TRAJECTORY_HEADER:
            raise ConfigError(f"{path}:1: expected header {','.join(TRAJECTORY_HEADER)}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(TRAJECTORY_HEADER):
                raise ConfigError(f"{path}:{line_no}: expected {len(TRAJECTORY_HEADER)} columns")
            try:
                n, j = int(row[0]), int(row[2])
                rho, mom = float(row[4]), float(row[5])
            except ValueError as exc:
                raise ConfigError(f"{path}:{line_no}: {exc}") from exc
            js, rs, ms = levels.setdefault(n, ([], [], []))
            js.append((j, line_no))
            rs.append(rho)
            ms.append(mom)
    if not levels:
        raise ConfigError(f"{path}: no data rows")
    profiles = []
    for n in sorted(levels):
        js, rs, ms = levels[n]
        got = [j for j, _ in js]
        want = grid.indices(n).tolist()
        if got != want:
            bad = next((ln for (j, ln), w in zip(js, want) if j != w), js[-1][1])
            raise ConfigError(f"{path}:{bad}: level n={n} does not cover J_{n} "
                              f"({len(got)} of {len(want)} cells)")
        try:
            profiles.append(StaggeredProfile(n, np.array(rs), np.array(ms), grid))
        except DomainError as exc:
            raise ConfigError(f"{path}:{js[0][1]}: {exc}") from exc
    return profiles

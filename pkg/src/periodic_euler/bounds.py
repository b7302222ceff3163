"""Invariant-region functionals, the cutoff, and the runtime containment checks.

The region at level n is

    -M_n - L + I_j  <=  z(u_j),      w(u_j)  <=  M_n + L + I_j,

where I_j integrates zeta from the left wall to x_j and L collects shock
entropy production, Jensen gaps of the averaging step and the weighted
Taylor remainders.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericalError
from .gas import (VACUUM_FLOOR, GasParams, GasState, RiemannPair, SchemeConstants,
                  eta_gradient, eta_hessian, eta_star, g_sources, invariants_of,
                  positive_power, state_of, zeta)
from .mesh import GridSpec, StaggeredProfile

_TAU, _TAU_W = np.polynomial.legendre.leggauss(16)
_TAU = 0.5 * (_TAU + 1.0)
_TAU_W = 0.5 * _TAU_W

DEFAULT_C_TOL = 10.0
INCREMENT_TOL = 1e-12


def tolerance(dx: float, c_tol: float = DEFAULT_C_TOL) -> float:
    """Stand-in for an o(dx) slack: c_tol * dx**1.05."""
    return c_tol * dx ** 1.05


def c_gamma(p: GasParams) -> float:
    g, th = p.gamma, p.theta
    first = 2.0 ** th * (th + 1.0)
    second = 2.0 * g * (g - 1.0) / (g - 2.0 + 0.5 ** (g - 1.0))
    return max(first, second)


def decay_bound(M: float, dt: float, n: int) -> float:
    return M * (1.0 - dt / 4.0) ** n


@dataclass(frozen=True)
class BoundState:
    n: int
    M_n: float
    L_shock: float
    L_jensen: float
    L_remainder: float
    I_values: np.ndarray
    C_gamma: float
    remainder_prefactor: float

    @property
    def L(self) -> float:
        return self.L_shock + self.L_jensen + self.L_remainder

    @classmethod
    def initial(cls, profile: StaggeredProfile, c: SchemeConstants, p: GasParams) -> "BoundState":
        cg = c_gamma(p)
        return cls(n=profile.n, M_n=decay_bound(c.M, profile.grid.dt, profile.n),
                   L_shock=0.0, L_jensen=0.0, L_remainder=0.0,
                   I_values=i_functional(profile, c, p), C_gamma=cg,
                   remainder_prefactor=1.0 + cg * c.alpha * profile.mass())


@dataclass(frozen=True)
class ContainmentReport:
    n: int
    indices: np.ndarray
    slack_lower: np.ndarray
    slack_upper: np.ndarray
    tol: float

    @property
    def worst(self) -> float:
        return float(min(self.slack_lower.min(), self.slack_upper.min()))

    @property
    def worst_index(self) -> int:
        both = np.minimum(self.slack_lower, self.slack_upper)
        return int(self.indices[int(np.argmin(both))])

    @property
    def passed(self) -> bool:
        return self.worst >= -self.tol

    @property
    def violation(self) -> float:
        """Size of the worst excursion outside the region (0 when inside)."""
        return max(0.0, -self.worst)

    def to_dict(self) -> dict:
        return {"n": self.n, "worst": self.worst, "worst_index": self.worst_index,
                "tol": self.tol, "passed": self.passed}


def i_values(rho, mom, widths, c: SchemeConstants, p: GasParams) -> np.ndarray:
    """Integral of zeta from the wall up to each cell centre.

    Full cells left of j are summed and half of cell j is added; at odd
    levels the boundary half-cells enter with their own width.
    """
    z = np.asarray(zeta(GasState(np.asarray(rho), np.asarray(mom)), c, p))
    contrib = np.asarray(widths) * z
    return np.cumsum(contrib) - 0.5 * contrib


def i_functional(profile: StaggeredProfile, c: SchemeConstants, p: GasParams) -> np.ndarray:
    return i_values(profile.rho, profile.mom, profile.widths, c, p)


def taylor_remainder(u_half: GasState, u_center: GasState, p: GasParams):
    """Integral over tau of (1 - tau) d^T Hess(eta)(u_c + tau d) d with d = u_half - u_c.

    Where the centre is vacuum the Hessian is singular at tau = 0; there the
    defining Taylor identity is used with the vacuum-convention gradient (0).
    """
    rh, mh = np.asarray(u_half.rho, float), np.asarray(u_half.mom, float)
    rc, mc = np.asarray(u_center.rho, float), np.asarray(u_center.mom, float)
    rh, mh, rc, mc = np.broadcast_arrays(rh, mh, rc, mc)
    dr, dm = rh - rc, mh - mc
    # all quadrature nodes at once: axis 0 runs over tau
    tau = _TAU.reshape((-1,) + (1,) * rh.ndim)
    weight = (_TAU_W * (1.0 - _TAU)).reshape(tau.shape)
    h_rr, h_rm, h_mm = eta_hessian(GasState(rc + tau * dr, mc + tau * dm), p)
    quad = h_rr * dr * dr + 2.0 * h_rm * dr * dm + h_mm * dm * dm
    total = np.sum(weight * quad, axis=0)
    vac = rc <= VACUUM_FLOOR
    if np.any(vac):
        total = np.where(vac, np.asarray(eta_star(GasState(rh, mh), p)), total)
    return total[()] if total.ndim == 0 else total


def taylor_identity(u_half: GasState, u_center: GasState, p: GasParams):
    """eta(u_half) - eta(u_c) - grad eta(u_c) . (u_half - u_c), the closed form of the remainder."""
    g_r, g_m = eta_gradient(u_center, p)
    return (np.asarray(eta_star(u_half, p)) - eta_star(u_center, p)
            - g_r * (np.asarray(u_half.rho) - u_center.rho)
            - g_m * (np.asarray(u_half.mom) - u_center.mom))


def l_update(bound: BoundState, art) -> BoundState:
    """Advance the three accumulators by the contributions recorded in a step."""
    shock = art.dt * float(np.sum(art.shock_entropy))
    jensen = float(np.sum(art.jensen_gap))
    rem = bound.remainder_prefactor * float(np.sum(art.weighted_remainder))
    scale = 1.0 + abs(bound.L)
    for name, inc in (("shock", shock), ("jensen", jensen), ("remainder", rem)):
        if inc < -INCREMENT_TOL * scale:
            raise NumericalError(f"negative {name} increment {inc:.3e} at step {art.n}")
    return replace(bound, n=art.n + 1, M_n=art.M_next,
                   L_shock=bound.L_shock + shock,
                   L_jensen=bound.L_jensen + jensen,
                   L_remainder=bound.L_remainder + rem,
                   I_values=np.asarray(art.I_next))


def cutoff_arrays(rho, mom, M_n: float, L: float, I, dx: float, delta: float, p: GasParams):
    """Vectorised cutoff. Returns (rho, mom, clamped_mask, vacuum_mask, crossed_mask)."""
    rho = np.asarray(rho, dtype=float)
    mom = np.asarray(mom, dtype=float)
    I = np.asarray(I, dtype=float)
    thin = rho < dx ** delta
    z, w = invariants_of(GasState(np.where(thin, 1.0, rho), np.where(thin, 0.0, mom)), p)
    lo = -M_n - L + I
    hi = M_n + L + I
    z_new = np.maximum(z, lo)
    w_new = np.minimum(w, hi)
    crossed = (w_new < z_new) & ~thin
    clamped = ((z_new != z) | (w_new != w)) & ~thin & ~crossed
    z_safe = np.where(crossed | thin, 0.0, z_new)
    w_safe = np.where(crossed | thin, 0.0, w_new)
    u = state_of(RiemannPair(z_safe, w_safe), p)
    keep = ~(clamped | thin | crossed)
    r_out = np.where(keep, rho, np.where(thin | crossed, 0.0, u.rho))
    m_out = np.where(keep, mom, np.where(thin | crossed, 0.0, u.mom))
    return r_out, m_out, clamped, thin, crossed


def cutoff(E_j: GasState, bound: BoundState, I_j: float, grid: GridSpec, delta: float,
           p: GasParams) -> GasState:
    r, m, _c, _v, _x = cutoff_arrays(np.array([E_j.rho]), np.array([E_j.mom]), bound.M_n,
                                     bound.L, np.array([I_j]), grid.dx, delta, p)
    return GasState(float(r[0]), float(m[0]))


def containment_check(profile: StaggeredProfile, bound: BoundState, c: SchemeConstants,
                      p: GasParams, tol: float | None = None, I=None) -> ContainmentReport:
    """Per-index slack of both region inequalities.

    I defaults to the values stored in ``bound`` when it is synchronised with
    the profile, otherwise it is recomputed from the profile itself.
    """
    if tol is None:
        tol = tolerance(profile.grid.dx)
    if I is None:
        stored = np.asarray(bound.I_values)
        I = stored if bound.n == profile.n and stored.shape == profile.rho.shape else \
            i_functional(profile, c, p)
    z, w = invariants_of(profile.state, p)
    lower = np.asarray(z) - (-bound.M_n - bound.L + I)
    upper = (bound.M_n + bound.L + I) - np.asarray(w)
    return ContainmentReport(profile.n, profile.indices, lower, upper, float(tol))


def boundary_compat_check(profile: StaggeredProfile, c: SchemeConstants, p: GasParams) -> dict:
    """Compatibility of the region with m = 0 at both walls.

    At the left wall the two bounds are -M_n and M_n, so -lower <= upper holds
    with margin 0. At the right wall lower + upper = 2 * integral of zeta,
    which must be <= 0.
    """
    total = float(np.sum(profile.widths * np.asarray(zeta(profile.state, c, p))))
    left_margin = 0.0
    right_margin = -2.0 * total
    return {"left_margin": left_margin, "right_margin": right_margin,
            "zeta_integral": total, "passed": right_margin >= 0.0}


def gronwall_envelope(t, c: SchemeConstants, p: GasParams):
    """Energy envelope C exp(kappa (theta M)^(1/theta) t)."""
    rate = c.kappa * (p.theta * c.M) ** (1.0 / p.theta)
    const = c.eta_bar + rate * (c.M + c.alpha * c.rho_bar + c.K)
    return const * np.exp(rate * np.asarray(t, dtype=float))


def energy_mass_report(profiles, forcing, c: SchemeConstants, p: GasParams,
                       jensen_total: float | None = None, c_tol: float = DEFAULT_C_TOL) -> dict:
    """Mass/energy series with the discrete energy inequality, Gronwall envelope and Jensen budget."""
    if not profiles:
        raise ValueError("empty trajectory")
    grid = profiles[0].grid
    tol = tolerance(grid.dx, c_tol)
    ns = [pr.n for pr in profiles]
    mass = [pr.mass() for pr in profiles]
    energy = [pr.energy(p) for pr in profiles]
    work = [grid.dt * float(np.sum(pr.widths * forcing(pr.x, pr.t) * pr.mom)) for pr in profiles]
    excess = []
    for k in range(len(profiles) - 1):
        gap = ns[k + 1] - ns[k]
        excess.append(energy[k + 1] - energy[k] - gap * work[k] - gap * tol)
    times = np.array([grid.t(n) for n in ns])
    envelope = gronwall_envelope(times, c, p)
    e0 = energy[0]
    report = {
        "n": ns,
        "mass": mass,
        "energy": energy,
        "work": work,
        "mass_drift": mass[-1] - mass[0],
        "max_mass_drift": float(np.max(np.abs(np.array(mass) - mass[0]))),
        "energy_tol": tol,
        "worst_energy_excess": float(max(excess)) if excess else 0.0,
        # same quantity before the tolerance is subtracted
        "worst_energy_increment": float(max(e + (ns[k + 1] - ns[k]) * tol
                                            for k, e in enumerate(excess))) if excess else 0.0,
        "energy_inequality_ok": bool(all(e <= 0.0 for e in excess)),
        "gronwall_ok": bool(np.all(np.array(energy) <= envelope)),
        "gronwall_envelope_end": float(envelope[-1]),
    }
    if jensen_total is not None:
        report["jensen_total"] = float(jensen_total)
        report["jensen_bound"] = e0 + tol
        report["jensen_ok"] = bool(jensen_total <= e0 + tol)
    return report


def decay_diagnostic(c: SchemeConstants, p: GasParams, samples: int = 2000, seed: int = 0,
                     energy_bound: float | None = None) -> dict:
    """Evaluate g2 on the upper region boundary (shifted w equal to M) without forcing.

    Shifted z is drawn uniformly inside each density branch, split at
    rho = (rho_bar M / 3)^(1/(theta+1)). The zeta-shift at the sample point
    is drawn from its admissible range: x in [0,1], integral of eta in
    [0, energy_bound], integral of rho in [0, rho_bar].
    """
    rng = np.random.default_rng(seed)
    th, M = p.theta, c.M
    e_bound = c.eta_bar if energy_bound is None else energy_bound
    rho_split = (c.rho_bar * M / 3.0) ** (1.0 / (th + 1.0))
    z_split = M - 2.0 * rho_split ** th / th
    target = -0.5 * M ** (1.0 + 2.0 * (p.gamma - 1.0) / (p.gamma + 1.0) - c.eps)
    out = {"rho_split": rho_split, "target": target, "branches": {}}
    half = samples // 2
    for name, (lo, hi) in (("high_density", (-M, max(z_split, -M))),
                           ("low_density", (max(z_split, -M), M))):
        # the endpoint zt = M is vacuum, where w = 0 by convention, so it is off the boundary
        zt = rng.uniform(lo, hi, half)
        rho = np.asarray(positive_power(th * (M - zt) / 2.0, 1.0 / th))
        x = rng.uniform(0.0, 1.0, half)
        shift = (rng.uniform(0.0, 1.0, half) * e_bound
                 - c.alpha * rng.uniform(0.0, 1.0, half) * c.rho_bar + c.K * x)
        v = (M + zt) / 2.0 + shift
        u = GasState(rho, np.where(rho > VACUUM_FLOOR, rho * v, 0.0))
        _g1, g2 = g_sources(u, c, p)
        g2 = np.asarray(g2)
        out["branches"][name] = {
            "count": int(half),
            "g2_min": float(g2.min()),
            "g2_max": float(g2.max()),
            "all_negative": bool(np.all(g2 < 0)),
            "fraction_below_target": float(np.mean(g2 <= target)),
        }
    allb = out["branches"].values()
    out["all_negative"] = all(b["all_negative"] for b in allb)
    out["fraction_below_target"] = float(np.mean([b["fraction_below_target"] for b in allb]))
    return out


@dataclass(frozen=True)
class Lemma33Result:
    status: str  # "pass", "fail" or "skipped"
    slack: float
    w_average: float
    bound_average: float


def lemma33_check(rho_sub, w_sub, bound_left: float, bound_slope: float, dx: float,
                  p: GasParams, delta: float, c_tol: float = 1.0) -> Lemma33Result:
    """Averaging estimate on one cell [0, 2dx] split into equal sub-cells.

    The field is (rho_sub, w_sub) on the sub-cells, bounded above by the
    affine A(y) = bound_left + bound_slope * y. Checks w of the averaged
    state against the cell mean of A plus c_tol * dx**1.1.
    """
    rho_sub = np.asarray(rho_sub, dtype=float)
    w_sub = np.asarray(w_sub, dtype=float)
    k = len(rho_sub)
    edges = np.linspace(0.0, 2.0 * dx, k + 1)
    a_edges = bound_left + bound_slope * edges
    a_min = np.minimum(a_edges[:-1], a_edges[1:])
    a_bar = bound_left + bound_slope * dx
    if rho_sub.mean() < dx ** delta or np.any(w_sub > a_min) or np.any(rho_sub < 0):
        return Lemma33Result("skipped", math.nan, math.nan, a_bar)
    v = w_sub - np.asarray(positive_power(rho_sub, p.theta)) / p.theta
    m = np.where(rho_sub > VACUUM_FLOOR, rho_sub * v, 0.0)
    E = GasState(float(rho_sub.mean()), float(m.mean()))
    w_avg = float(invariants_of(E, p).w)
    slack = a_bar + c_tol * dx ** 1.1 - w_avg
    return Lemma33Result("pass" if slack >= 0 else "fail", slack, w_avg, a_bar)


def random_lemma33_field(rng: np.random.Generator, dx: float, p: GasParams, delta: float,
                         sub_cells: int = 16, slope_scale: float = 2.0):
    """Draw (rho_sub, w_sub, A0, A1) satisfying the averaging-lemma preconditions."""
    floor = dx ** delta
    level = floor * 10.0 ** rng.uniform(0.0, 4.0)
    rho = level * rng.uniform(0.0, 2.0, sub_cells)
    if rho.mean() < floor:
        rho *= floor / rho.mean() * (1.0 + 1e-9)
    slope = rng.uniform(-slope_scale, slope_scale)
    a0 = rng.uniform(-5.0, 5.0)
    edges = np.linspace(0.0, 2.0 * dx, sub_cells + 1)
    a_edges = a0 + slope * edges
    a_min = np.minimum(a_edges[:-1], a_edges[1:])
    gap = rng.exponential(0.05, sub_cells) * (rng.uniform(size=sub_cells) < 0.7)
    return rho, a_min - gap, a0, slope


def lemma44_check(profile: StaggeredProfile, c: SchemeConstants, p: GasParams, I=None) -> dict:
    """Both inequalities of the end-of-period bound with margin M/10."""
    if I is None:
        I = i_functional(profile, c, p)
    z, w = invariants_of(profile.state, p)
    lower = np.asarray(z) - (-c.M - c.M / 10.0 + I)
    upper = (c.M + I + c.M / 10.0) - np.asarray(w)
    worst = float(min(lower.min(), upper.min()))
    return {"n": profile.n, "lower_margin": float(lower.min()),
            "upper_margin": float(upper.min()), "worst": worst, "passed": worst >= 0.0}

"""Exact Riemann solver for the isentropic gas and the rarefaction-fan partition.

The scalar solver (:func:`solve_riemann`) is used for oracles, the CLI and
diagnostics. :func:`middle_states` solves many problems at once with a
vectorised safeguarded Newton iteration; the stepper uses it to estimate
shock entropy production at every interface.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, DomainError, NumericalError
from .gas import (VACUUM_FLOOR, GasParams, GasState, RiemannPair, char_speeds, eta_star,
                  invariants_of, positive_power, pressure, q_star, state_of, velocity)

ROOT_TOL = 1e-12
MAX_ITER = 200


class WaveKind(enum.Enum):
    RAREFACTION_1 = "1-rarefaction"
    SHOCK_1 = "1-shock"
    RAREFACTION_2 = "2-rarefaction"
    SHOCK_2 = "2-shock"
    VACUUM = "vacuum"


@dataclass(frozen=True)
class RiemannSolution:
    left: GasState
    middle: GasState
    right: GasState
    wave1: WaveKind
    wave2: WaveKind
    speeds1: tuple[float, float]
    speeds2: tuple[float, float]
    vacuum: bool = False

    @property
    def pattern(self) -> str:
        if self.vacuum:
            return "vacuum"
        if self.degenerate:
            return "degenerate"
        return f"{self.wave1.value} + {self.wave2.value}"

    @property
    def degenerate(self) -> bool:
        tol = 1e-14 * (1.0 + abs(self.left.rho) + abs(self.right.rho)
                       + abs(self.left.mom) + abs(self.right.mom))
        return (abs(self.left.rho - self.right.rho) <= tol
                and abs(self.left.mom - self.right.mom) <= tol)

    def shocks(self):
        """Yield (speed, state ahead-left, state behind-right) for each shock."""
        if self.wave1 is WaveKind.SHOCK_1:
            yield self.speeds1[0], self.left, self.middle
        if self.wave2 is WaveKind.SHOCK_2:
            yield self.speeds2[0], self.middle, self.right


@dataclass(frozen=True)
class FanParams:
    alpha_fan: float = 0.75
    beta: float = 0.05
    delta: float | None = None

    def resolved_delta(self, p: GasParams) -> float:
        if self.delta is not None:
            return self.delta
        return 0.5 * (1.0 + 1.0 / (2.0 * p.theta))

    def validate(self, p: GasParams) -> "FanParams":
        a, b, d = self.alpha_fan, self.beta, self.resolved_delta(p)
        problems = []
        if not 0.5 + b / 2 < a < 1 - 2 * b:
            problems.append("need 1/2 + beta/2 < alpha_fan < 1 - 2 beta")
        if not 0 <= b < 2 / (p.gamma + 5):
            problems.append("need 0 <= beta < 2/(gamma+5)")
        if not (9 - 3 * p.gamma) * b / 2 < a:
            problems.append("need (9 - 3 gamma) beta / 2 < alpha_fan")
        if not 1 < d < 1 / (2 * p.theta):
            problems.append(f"need 1 < delta < 1/(2 theta) = {1 / (2 * p.theta):.6g}")
        if problems:
            raise ConfigError("invalid fan parameters: " + "; ".join(problems))
        return FanParams(a, b, d)


@dataclass(frozen=True)
class FanPartition:
    p: int
    z_stars: np.ndarray
    speeds: np.ndarray


def shock_speed_fn(rho, rho0, p: GasParams):
    """S(rho, rho0) = sqrt(rho (p(rho) - p(rho0)) / (rho0 (rho - rho0))).

    On the diagonal it takes its limit sqrt(p'(rho0)) = rho0**theta.
    """
    rho = np.asarray(rho, dtype=float)
    rho0 = np.asarray(rho0, dtype=float)
    if np.any(rho0 <= 0):
        raise DomainError("S(rho, rho0) needs rho0 > 0")
    if np.any(rho < 0):
        raise DomainError("S(rho, rho0) needs rho >= 0")
    diff = rho - rho0
    near = np.abs(diff) <= 1e-7 * rho0
    safe = np.where(near, 1.0, diff)
    ratio = (np.asarray(pressure(rho, p)) - np.asarray(pressure(rho0, p))) / safe
    # second-order expansion of the difference quotient around rho0
    g = p.gamma
    r0 = np.asarray(positive_power(rho0, g - 1.0))
    quotient = np.where(near, r0 * (1.0 + 0.5 * (g - 1.0) * diff / rho0), ratio)
    out = np.sqrt(np.maximum(rho * quotient / rho0, 0.0))
    return out[()] if out.ndim == 0 else out


def _curve(rho, rho_k, p: GasParams):
    """Velocity drop along a wave curve from a state of density rho_k to density rho."""
    th = p.theta
    if rho <= rho_k:
        return (positive_power(rho, th) - positive_power(rho_k, th)) / th
    return math.sqrt((rho - rho_k) * (pressure(rho, p) - pressure(rho_k, p)) / (rho * rho_k))


def _vacuum_solution(uL, uR, p: GasParams) -> RiemannSolution:
    zL, wL = invariants_of(uL, p)
    zR, wR = invariants_of(uR, p)
    lamL = char_speeds(uL, p)[0] if uL.rho > VACUUM_FLOOR else (zR if uR.rho > VACUUM_FLOOR else 0.0)
    lamR = char_speeds(uR, p)[1] if uR.rho > VACUUM_FLOOR else (wL if uL.rho > VACUUM_FLOOR else 0.0)
    head1 = float(lamL)
    tail1 = float(wL) if uL.rho > VACUUM_FLOOR else head1
    tail2 = float(zR) if uR.rho > VACUUM_FLOOR else float(lamR)
    head2 = float(lamR)
    return RiemannSolution(uL, GasState(0.0, 0.0), uR, WaveKind.RAREFACTION_1,
                           WaveKind.RAREFACTION_2, (head1, tail1), (tail2, head2), vacuum=True)


def solve_riemann(uL: GasState, uR: GasState, p: GasParams) -> RiemannSolution:
    uL = GasState(float(uL.rho), float(uL.mom))
    uR = GasState(float(uR.rho), float(uR.mom))
    if uL.rho < 0 or uR.rho < 0:
        raise DomainError("Riemann data must have non-negative density")
    if uL.rho <= VACUUM_FLOOR or uR.rho <= VACUUM_FLOOR:
        uL = uL if uL.rho > VACUUM_FLOOR else GasState(0.0, 0.0)
        uR = uR if uR.rho > VACUUM_FLOOR else GasState(0.0, 0.0)
        return _vacuum_solution(uL, uR, p)

    th = p.theta
    vL, vR = float(velocity(uL)), float(velocity(uR))
    rL, rR = uL.rho, uR.rho
    zL, wL = (float(x) for x in invariants_of(uL, p))
    zR, wR = (float(x) for x in invariants_of(uR, p))
    if wL <= zR:
        return _vacuum_solution(uL, uR, p)

    def mismatch(rho):
        return (vL - _curve(rho, rL, p)) - (vR + _curve(rho, rR, p))

    hi = max(rL, rR)
    for _ in range(MAX_ITER):
        if mismatch(hi) < 0:
            break
        hi *= 2.0
    else:
        raise NumericalError(f"no upper bracket for middle density (last tried {hi:g})")
    try:
        rM = brentq(mismatch, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                    maxiter=MAX_ITER)
    except RuntimeError as exc:
        raise NumericalError(f"middle-state root find failed on [0, {hi:g}]: {exc}") from exc
    scale = 1.0 + abs(vL) + abs(vR) + abs(wL) + abs(zR)
    if abs(mismatch(rM)) > ROOT_TOL * scale:
        raise NumericalError(
            f"velocity mismatch {mismatch(rM):.3e} at rho_M={rM:.17g}, bracket [0, {hi:g}]")

    sM = positive_power(rM, th) / th
    rare1, rare2 = rM <= rL, rM <= rR
    if rare1:
        vM = wL - sM
    elif rare2:
        vM = zR + sM
    else:
        vM = vL - _curve(rM, rL, p)
    uM = GasState(rM, rM * vM)
    lamM1, lamM2 = char_speeds(uM, p)
    if rare1:
        w1, sp1 = WaveKind.RAREFACTION_1, (float(char_speeds(uL, p)[0]), float(lamM1))
    else:
        s = vL - float(shock_speed_fn(rM, rL, p))
        w1, sp1 = WaveKind.SHOCK_1, (s, s)
    if rare2:
        w2, sp2 = WaveKind.RAREFACTION_2, (float(lamM2), float(char_speeds(uR, p)[1]))
    else:
        s = vR + float(shock_speed_fn(rM, rR, p))
        w2, sp2 = WaveKind.SHOCK_2, (s, s)
    return RiemannSolution(uL, uM, uR, w1, w2, sp1, sp2)


def sample_riemann(sol: RiemannSolution, xi: float, p: GasParams) -> GasState:
    """State of the self-similar solution on the ray x/t = xi."""
    th = p.theta
    head1, tail1 = sol.speeds1
    tail2, head2 = sol.speeds2
    if xi < head1:
        return sol.left
    if sol.wave1 is WaveKind.RAREFACTION_1 and xi <= tail1 and sol.left.rho > 0:
        wL = float(invariants_of(sol.left, p).w)
        c = max(th * (wL - xi) / (th + 1.0), 0.0)
        return state_of(RiemannPair(xi + c - c / th, xi + c + c / th), p)
    if xi < tail2:
        return sol.middle
    if sol.wave2 is WaveKind.RAREFACTION_2 and xi <= head2 and sol.right.rho > 0:
        zR = float(invariants_of(sol.right, p).z)
        c = max(th * (xi - zR) / (th + 1.0), 0.0)
        return state_of(RiemannPair(xi - c - c / th, xi - c + c / th), p)
    return sol.right


def entropy_production(sigma, uL: GasState, uR: GasState, p: GasParams):
    """sigma [eta_star] - [q_star] with jumps taken right minus left."""
    return sigma * (np.asarray(eta_star(uR, p)) - eta_star(uL, p)) - (
        np.asarray(q_star(uR, p)) - q_star(uL, p))


def fan_partition(uL: GasState, zM: float, dx: float, fp: FanParams, p: GasParams) -> FanPartition:
    zL, wL = (float(x) for x in invariants_of(uL, p))
    if zM < zL:
        raise DomainError(f"fan end z_M={zM} lies below z_L={zL}")
    if zM > wL:
        raise DomainError("fan end z_M exceeds w_L (density would be negative)")
    h = dx ** fp.alpha_fan
    q = (zM - zL) / h
    nearest = round(q)
    whole = nearest if abs(q - nearest) <= 1e-9 * max(1.0, q) else math.floor(q)
    count = max(int(whole) + 1, 2)
    z_stars = zL + h * np.arange(count, dtype=float)
    z_stars[-1] = zM
    rho = np.asarray(state_of(RiemannPair(z_stars, np.full(count, wL)), p).rho)
    v = (z_stars + wL) / 2.0
    speeds = np.empty(count - 1)
    for i in range(count - 1):
        if rho[i] <= VACUUM_FLOOR:
            speeds[i] = v[i]
        else:
            speeds[i] = v[i] - float(shock_speed_fn(rho[i + 1], rho[i], p))
    return FanPartition(count, z_stars, speeds)


# -- vectorised middle states -------------------------------------------------

def _curve_batch(rho, rho_k, p: GasParams):
    """Vectorised wave-curve velocity drop and its derivative in rho."""
    th, g = p.theta, p.gamma
    rare = rho <= rho_k
    r_th = np.asarray(positive_power(rho, th))
    k_th = np.asarray(positive_power(rho_k, th))
    val_r = (r_th - k_th) / th
    der_r = np.asarray(positive_power(rho, th - 1.0))
    safe_rho = np.where(rho > VACUUM_FLOOR, rho, 1.0)
    safe_k = np.where(rho_k > VACUUM_FLOOR, rho_k, 1.0)
    dp = (np.asarray(positive_power(rho, g)) - np.asarray(positive_power(rho_k, g))) / g
    base = dp / (safe_rho * safe_k)
    h = np.maximum((rho - rho_k) * base, 0.0)
    dh = ((dp + (rho - rho_k) * np.asarray(positive_power(rho, g - 1.0))) / (safe_rho * safe_k)
          - base * (rho - rho_k) / safe_rho)
    val_s = np.sqrt(h)
    der_s = np.where(val_s > 0, dh / (2.0 * np.where(val_s > 0, val_s, 1.0)), der_r)
    return np.where(rare, val_r, val_s), np.where(rare, der_r, der_s)


def middle_states(rhoL, vL, rhoR, vR, p: GasParams, iters: int = 100):
    """Middle densities and velocities for arrays of Riemann problems.

    Returns (rho_M, v_M, vacuum_mask). Problems with a vacuum side state or
    non-intersecting wave curves are flagged in the mask with rho_M = 0.
    """
    rhoL, vL, rhoR, vR = (np.asarray(a, dtype=float) for a in (rhoL, vL, rhoR, vR))
    th = p.theta
    wL = vL + np.asarray(positive_power(rhoL, th)) / th
    zR = vR - np.asarray(positive_power(rhoR, th)) / th
    vac = (rhoL <= VACUUM_FLOOR) | (rhoR <= VACUUM_FLOOR) | (wL <= zR)

    def phi(r):
        a, da = _curve_batch(r, rhoL, p)
        b, db = _curve_batch(r, rhoR, p)
        return vL - vR - a - b, -da - db

    lo = np.zeros_like(rhoL)
    hi = np.maximum(np.maximum(rhoL, rhoR), VACUUM_FLOOR * 2)
    for _ in range(MAX_ITER):
        f_hi, _d = phi(hi)
        grow = (f_hi >= 0) & ~vac
        if not grow.any():
            break
        hi = np.where(grow, 2.0 * hi, hi)
    # two-rarefaction estimate: exact when both waves are rarefactions
    guess = np.asarray(positive_power(np.maximum(th * (wL - zR) / 2.0, 0.0), 1.0 / th))
    x = np.where((guess > lo) & (guess < hi), guess, 0.5 * (lo + hi))
    x = np.where(vac, 0.0, x)
    done = vac.copy()
    for _ in range(iters):
        f, d = phi(x)
        lo = np.where(f > 0, x, lo)
        hi = np.where(f <= 0, x, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = x - f / d
        ok = np.isfinite(newton) & (newton >= lo) & (newton <= hi)
        x_new = np.where(ok, newton, 0.5 * (lo + hi))
        # converged entries stay put; round-off would otherwise keep them bouncing
        done |= np.abs(x_new - x) <= 4e-15 * np.abs(x) + 1e-300
        x = np.where(done, x, x_new)
        if done.all():
            break
    x = np.where(vac, 0.0, x)
    rare1 = x <= rhoL
    s = np.asarray(positive_power(x, th)) / th
    shock_v = vL - _curve_batch(x, rhoL, p)[0]
    v_mid = np.where(rare1, wL - s, shock_v)
    v_mid = np.where(vac, 0.0, v_mid)
    return x, v_mid, vac


def shock_entropy_batch(rhoL, mL, rhoR, mR, p: GasParams):
    """Entropy production of the 1-shock and 2-shock (zero where absent), per problem."""
    rhoL, mL, rhoR, mR = (np.asarray(a, dtype=float) for a in (rhoL, mL, rhoR, mR))
    vL = np.asarray(velocity(GasState(rhoL, mL)))
    vR = np.asarray(velocity(GasState(rhoR, mR)))
    rM, vM, vac = middle_states(rhoL, vL, rhoR, vR, p)
    uM = GasState(rM, rM * vM)
    uL, uR = GasState(rhoL, mL), GasState(rhoR, mR)
    shock1 = (rM > rhoL) & ~vac
    shock2 = (rM > rhoR) & ~vac
    safeL = np.where(shock1, rhoL, 1.0)
    safeR = np.where(shock2, rhoR, 1.0)
    s1 = vL - np.asarray(shock_speed_fn(np.where(shock1, rM, 1.0), safeL, p))
    s2 = vR + np.asarray(shock_speed_fn(np.where(shock2, rM, 1.0), safeR, p))
    e1 = np.where(shock1, entropy_production(s1, uL, uM, p), 0.0)
    e2 = np.where(shock2, entropy_production(s2, uM, uR, p), 0.0)
    return e1, e2

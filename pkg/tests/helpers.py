"""Shared test helpers: a manufactured smooth solution with closed-form cell averages, and jump residuals."""
import numpy as np

from periodic_euler.gas import GasParams, derive_constants, momentum_flux
from periodic_euler.mesh import StaggeredProfile, build_grid, callable_forcing
from periodic_euler.scheme import RAW, StepperConfig, step

A = 0.2


def exact_avg(a, b, t):
    """Exact averages over [a, b] of rho = 1 + A cos(pi x) cos(2 pi t), m = 2A sin(pi x) sin(2 pi t)."""
    width = b - a
    rho = 1 + A * np.cos(2 * np.pi * t) * (np.sin(np.pi * b) - np.sin(np.pi * a)) / (np.pi * width)
    mom = 2 * A * np.sin(2 * np.pi * t) * (np.cos(np.pi * a) - np.cos(np.pi * b)) / (np.pi * width)
    return rho, mom


def manufactured_force(gamma):
    """F making the pair above an exact solution of the forced momentum equation."""
    def F(x, t):
        x = np.asarray(x, dtype=float)
        rho = 1 + A * np.cos(np.pi * x) * np.cos(2 * np.pi * t)
        rho_x = -np.pi * A * np.sin(np.pi * x) * np.cos(2 * np.pi * t)
        m = 2 * A * np.sin(np.pi * x) * np.sin(2 * np.pi * t)
        m_x = 2 * np.pi * A * np.cos(np.pi * x) * np.sin(2 * np.pi * t)
        m_t = 4 * np.pi * A * np.sin(np.pi * x) * np.cos(2 * np.pi * t)
        flux_x = 2 * m * m_x / rho - m * m * rho_x / rho ** 2 + rho ** (gamma - 1) * rho_x
        return (m_t + flux_x) / rho
    return F


def level(grid, n):
    # odd symmetry of m and even symmetry of rho about both walls make the
    # full-width average of the reflected extension the reference at wall cells
    x = grid.x(grid.indices(n))
    rho, mom = exact_avg(x - grid.dx, x + grid.dx, grid.t(n))
    return StaggeredProfile(n, rho, mom, grid)


def truncation_errors(Nxs, gamma=1.4, M=2.0, samples=8):
    """One-step defect / dt per resolution, over levels spread across a period.

    Returns dx and three norms of the defect: width-weighted L1 over all
    cells, sup over interior cells, sup over the two wall cells.
    """
    p = GasParams(gamma)
    F = callable_forcing(manufactured_force(p.gamma), None)
    out = {"dx": [], "l1": [], "interior": [], "wall": []}
    for Nx in Nxs:
        g = build_grid(Nx, M)
        c = derive_constants(M, 0.1, 1.0, 1.0, p)
        cfg = StepperConfig(mode=RAW, forcing=F, constants=c, gas=p, grid=g)
        l1 = interior = wall = 0.0
        starts = [round(k * g.steps_per_period / samples) for k in range(samples)]
        for n in sorted({s + d for s in starts for d in (0, 1)}):
            got, _ = step(level(g, n), cfg)
            ref = level(g, n + 1)
            d = np.maximum(np.abs(got.rho - ref.rho), np.abs(got.mom - ref.mom)) / g.dt
            l1 = max(l1, float(np.sum(ref.widths * d)))
            interior = max(interior, float(np.max(d[1:-1])))
            wall = max(wall, float(max(d[0], d[-1])))
        out["dx"].append(g.dx)
        out["l1"].append(l1)
        out["interior"].append(interior)
        out["wall"].append(wall)
    return {k: np.array(v) for k, v in out.items()}


def order(dxs, errs) -> float:
    """Least-squares slope of log err against log dx."""
    return float(np.polyfit(np.log(dxs), np.log(errs), 1)[0])


def rh_residuals(sigma, a, b, p):
    """Relative residuals of both jump conditions."""
    r1 = abs((b.mom - a.mom) - sigma * (b.rho - a.rho)) / (abs(a.mom) + abs(b.mom) + abs(sigma) * (a.rho + b.rho))
    fa, fb = momentum_flux(a, p), momentum_flux(b, p)
    r2 = abs((fb - fa) - sigma * (b.mom - a.mom)) / (abs(fa) + abs(fb) + abs(sigma) * (abs(a.mom) + abs(b.mom)))
    return r1, r2

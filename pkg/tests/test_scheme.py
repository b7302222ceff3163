import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from periodic_euler.bounds import BoundState, containment_check, l_update
from periodic_euler.errors import ConfigError, NumericalError
from periodic_euler.gas import (GasParams, GasState, SchemeConstants, char_speeds, derive_constants,
                                momentum_flux, pressure, q_star, zeta)
from periodic_euler.mesh import (StaggeredProfile, build_grid, callable_forcing, project_initial,
                                 sinusoidal_forcing, zero_forcing)
from periodic_euler.riemann import entropy_production, solve_riemann
from helpers import level, manufactured_force, order, truncation_errors
from periodic_euler.scheme import (CUTOFF, RAW, StepperConfig, gh_terms, read_trajectory,
                                   rs_corrections, run_period, step, write_trajectory, xi_k)


def bare_constants(K=0.0, alpha=0.0, M=10.0):
    return SchemeConstants(M=M, eps=0.1, kappa=0.0, K=K, alpha=alpha, rho_bar=1.0, eta_bar=0.5)


def config(grid, p, c, mode=RAW, forcing=None, **kw):
    return StepperConfig(mode=mode, forcing=forcing or zero_forcing(), constants=c, gas=p,
                         grid=grid, **kw)


def random_profile(grid, n, rng, lo=0.3, hi=2.0, vscale=0.5):
    k = len(grid.indices(n))
    rho = rng.uniform(lo, hi, k)
    return StaggeredProfile(n, rho, rho * rng.normal(0, vscale, k), grid)


# -- coefficient formulas -------------------------------------------------------

def test_xi_examples(gas2):
    g = build_grid(6, 10.0)
    const = StaggeredProfile(0, np.full(6, 0.8), np.full(6, 0.3), g)
    assert xi_k(const, 3, g, gas2) == pytest.approx(2 * 0.3 * g.dx, rel=1e-15)
    rho = np.linspace(0.5, 1.5, 6)
    still = StaggeredProfile(0, rho, np.zeros(6), g)
    want = -(2 * g.dt / 3) * (pressure(rho[2], gas2) - pressure(rho[1], gas2))
    assert xi_k(still, 3, g, gas2) == pytest.approx(want, rel=1e-14)


def test_xi_recomputed_from_raw_fields(gas, rng):
    g = build_grid(8, 3.0)
    prof = random_profile(g, 1, rng)
    r, m = prof.rho, prof.mom
    for k in range(len(r) - 1):
        flux = lambda i: m[i] ** 2 / r[i] + r[i] ** gas.gamma / gas.gamma
        want = (m[k + 1] + m[k]) * g.dx - (2 * g.dt / 3) * (flux(k + 1) - flux(k))
        got = xi_k(prof, int(prof.indices[k]), g, gas)
        assert abs(got - want) <= 1e-15 * max(1.0, abs(want)) * 4


def _gh_oracle(prof, j, F, c, p):
    """G, H written out from raw fields at a single index."""
    g, th = p.gamma, p.theta
    k = int(np.flatnonzero(prof.indices == j)[0])
    r, m = prof.rho[k], prof.mom[k]
    v = m / r if r > 0 else 0.0
    l1, l2 = char_speeds(GasState(r, m), p)
    moment = 0.0
    for i in range(k):
        ki = int(prof.indices[i])
        moment += F(np.array([prof.grid.x(ki + 1)]), prof.t)[0] * xi_k(prof, ki, prof.grid, p)
    tail = F(np.array([prof.grid.x(j)]), prof.t)[0] - moment
    top = r ** (g + th) / (g * (g - 1))
    mid = r ** g * v / g
    kin = 0.5 * r ** (th + 1) * v * v
    well = c.alpha * r ** (th + 1)
    G = -c.K * l1 + top + mid + kin - well + tail
    H = -c.K * l2 - top + mid - kin + well + tail
    return G, H


def test_gh_terms_recomputed(gas, rng):
    g = build_grid(8, 3.0)
    c = derive_constants(3.0, 0.1, 1.0, 0.7, gas if gas.gamma < 2 else GasParams(1.4), kappa=0.5)
    F = sinusoidal_forcing(0.5)
    for n in (0, 3):
        prof = random_profile(g, n, rng)
        for j in prof.indices:
            got = gh_terms(prof, int(j), F, c, gas)
            want = _gh_oracle(prof, int(j), F, c, gas)
            assert got == pytest.approx(want, rel=1e-13, abs=1e-13)


def test_gh_vacuum_and_uniform(gas2):
    g = build_grid(5, 10.0)
    vac = StaggeredProfile(0, np.zeros(5), np.zeros(5), g)
    assert gh_terms(vac, 3, zero_forcing(), bare_constants(), gas2) == (0.0, 0.0)
    c = derive_constants(10.0, 0.1, 1.0, 0.5, gas2)
    const = StaggeredProfile(0, np.full(5, 0.9), np.full(5, 0.2), g)
    vals = [gh_terms(const, int(j), zero_forcing(), c, gas2) for j in const.indices]
    assert all(v == vals[0] for v in vals)


def test_g_plus_h_cross_check(gas, rng):
    g = build_grid(6, 3.0)
    c = derive_constants(3.0, 0.1, 1.0, 0.7, GasParams(1.4), kappa=0.5)
    F = sinusoidal_forcing(0.5)
    prof = random_profile(g, 0, rng)
    for k, j in enumerate(prof.indices):
        G, H = gh_terms(prof, int(j), F, c, gas)
        r, m = prof.rho[k], prof.mom[k]
        l1, l2 = char_speeds(GasState(r, m), gas)
        G0, H0 = gh_terms(prof, int(j), zero_forcing(), c, gas)
        forcing_part = (G - G0) + (H - H0)
        want = -c.K * (l1 + l2) + (2 / gas.gamma) * r ** gas.gamma * (m / r) + forcing_part
        assert G + H == pytest.approx(want, rel=1e-13)
        # the forcing enters both terms identically
        assert G - G0 == pytest.approx(H - H0, rel=1e-13, abs=1e-15)


def test_rs_recomputed(gas, rng):
    g = build_grid(8, 3.0)
    c = derive_constants(3.0, 0.1, 1.0, 0.7, GasParams(1.4), kappa=0.5)
    F = sinusoidal_forcing(0.5)
    prof = random_profile(g, 1, rng)
    th = gas.theta
    coef = g.dt ** 2 / (8 * g.dx)
    for k, j in enumerate(prof.indices):
        G, H = _gh_oracle(prof, int(j), F, c, gas)
        r, m = prof.rho[k], prof.mom[k]
        v = m / r
        u = GasState(r, m)
        R = coef * (r * (H + G) + m / r ** th * (H - G))
        V = q_star(u, gas) - c.alpha * m
        S = g.dx / 4 * r * zeta(u, c, gas) + coef * (
            2 * r * (H + G + 2 * V) + (r * v * v + r ** gas.gamma) / r ** th * (H - G) - 2 * m)
        got = rs_corrections(prof, int(j), F, c, gas)
        assert got[0] == pytest.approx(R, rel=1e-12, abs=1e-16)
        assert got[1] == pytest.approx(S, rel=1e-12, abs=1e-16)


def test_rs_vacuum_and_uniform(gas2):
    g = build_grid(5, 10.0)
    c = derive_constants(10.0, 0.1, 1.0, 0.5, gas2)
    vac = StaggeredProfile(0, np.zeros(5), np.zeros(5), g)
    assert rs_corrections(vac, 5, zero_forcing(), c, gas2) == (0.0, 0.0)
    const = StaggeredProfile(0, np.full(5, 0.9), np.full(5, 0.2), g)
    vals = [rs_corrections(const, int(j), zero_forcing(), c, gas2) for j in const.indices]
    assert all(v == vals[0] for v in vals)


# -- one step ----------------------------------------------------------------

@pytest.mark.parametrize("mode", [RAW, CUTOFF])
def test_rest_state_is_preserved(mode):
    p = GasParams(1.4)
    g = build_grid(25, 10.0)
    c = derive_constants(10.0, 0.1, 1.0, 1.0 / (p.gamma * (p.gamma - 1)), p)
    rest = StaggeredProfile(0, np.ones(25), np.zeros(25), g)
    res = run_period(rest, config(g, p, c, mode), record=False)
    assert res.final.n == 1050
    assert np.max(np.abs(res.final.rho - 1.0)) < 1e-12
    assert np.max(np.abs(res.final.mom)) < 1e-12
    assert res.bound.L == pytest.approx(0.0, abs=1e-12)


def test_constant_step_adds_nothing_to_the_accumulators():
    p = GasParams(1.4)
    g = build_grid(10, 10.0)
    c = derive_constants(10.0, 0.1, 1.0, 1.0 / (p.gamma * (p.gamma - 1)), p)
    rest = StaggeredProfile(0, np.ones(10), np.zeros(10), g)
    cfg = config(g, p, c, CUTOFF)
    _new, art = step(rest, cfg, BoundState.initial(rest, c, p))
    assert np.all(art.shock_entropy == 0)
    assert np.max(np.abs(art.jensen_gap)) < 1e-15
    assert np.max(np.abs(art.weighted_remainder)) < 1e-15


def test_parity_of_output(rng):
    p = GasParams(1.4)
    g = build_grid(7, 2.0)
    c = derive_constants(2.0, 0.1, 1.0, 1.0, p)
    prof = random_profile(g, 0, rng)
    for _ in range(3):
        new, _art = step(prof, config(g, p, c))
        assert new.n == prof.n + 1
        assert np.array_equal(new.indices, g.indices(prof.n + 1))
        prof = new


def test_term_by_term_step_oracle(gas):
    """Riemann data, K = alpha = 0, F = 0: Lax-Friedrichs plus the correction terms, by hand."""
    g = build_grid(4, 3.0)
    c = bare_constants(M=3.0)
    rho = np.array([1.0, 1.0, 0.4, 0.4])
    mom = np.array([0.2, 0.2, -0.1, -0.1])
    prof = StaggeredProfile(0, rho, mom, g)
    new, _art = step(prof, config(g, gas, c))
    th, gm = gas.theta, gas.gamma
    coef = g.dt ** 2 / (8 * g.dx)

    def rs(r, m):
        v = m / r
        G = r ** (gm + th) / (gm * (gm - 1)) + r ** gm * v / gm + 0.5 * r ** (th + 1) * v * v
        H = -r ** (gm + th) / (gm * (gm - 1)) + r ** gm * v / gm - 0.5 * r ** (th + 1) * v * v
        R = coef * (r * (H + G) + m / r ** th * (H - G))
        V = m * (0.5 * v * v + r ** (gm - 1) / (gm - 1))
        eta = 0.5 * m * v + r ** gm / (gm * (gm - 1))
        S = g.dx / 4 * r * eta + coef * (2 * r * (H + G + 2 * V)
                                        + (r * v * v + r ** gm) / r ** th * (H - G) - 2 * m)
        return R, S

    flux = lambda r, m: m * m / r + r ** gm / gm
    lam = g.dt / (2 * g.dx)
    # the interior cell j = 4 straddles the jump between j = 3 and j = 5
    (Ra, Sa), (Rb, Sb) = rs(1.0, 0.2), rs(0.4, -0.1)
    want_rho = 0.5 * (1.0 + 0.4) - lam * (-0.1 - 0.2) - Rb + Ra
    want_mom = 0.5 * (0.2 - 0.1) - lam * (flux(0.4, -0.1) - flux(1.0, 0.2)) - Sb + Sa
    k = int(np.flatnonzero(new.indices == 4)[0])
    assert new.rho[k] == pytest.approx(want_rho, rel=1e-14)
    assert new.mom[k] == pytest.approx(want_mom, rel=1e-13)
    # wall cell j = 0: mirrored ghost of cell 1
    want_rho0 = 1.0 - lam * (0.2 - (-0.2)) - Ra + (-Ra)  # ghost m is -m, ghost R is -R
    want_mom0 = 0.0 - lam * (flux(1.0, 0.2) - flux(1.0, 0.2)) - Sa + Sa
    assert new.rho[0] == pytest.approx(want_rho0, rel=1e-14)
    assert new.mom[0] == pytest.approx(want_mom0, abs=1e-16)


def test_shock_term_matches_riemann_entropy(gas):
    g = build_grid(4, 3.0)
    c = bare_constants(M=3.0)
    uL, uR = GasState(1.0, 0.5), GasState(1.0, -0.5)
    prof = StaggeredProfile(0, [1.0, 1.0, 1.0, 1.0], [0.5, 0.5, -0.5, -0.5], g)
    _new, art = step(prof, config(g, gas, c, track_shocks=True))
    sol = solve_riemann(uL, uR, gas)
    want = sum(entropy_production(s, a, b, gas) for s, a, b in sol.shocks())
    assert want > 0
    assert art.dt * art.shock_entropy.sum() == pytest.approx(art.dt * want, abs=1e-10)


def test_forcing_sign_accelerates_along_f():
    p = GasParams(1.4)
    g = build_grid(10, 2.0)
    c = derive_constants(2.0, 0.1, 1.0, 1.0 / (p.gamma * (p.gamma - 1)), p)
    push = callable_forcing(lambda x, t: np.ones_like(x), 1.0)
    rest = StaggeredProfile(0, np.ones(10), np.zeros(10), g)
    new, _ = step(rest, config(g, p, c, forcing=push))
    interior = new.mom[1:-1]
    assert np.allclose(interior, g.dt, rtol=1e-12)


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([RAW, CUTOFF]))
def test_jensen_gaps_nonnegative(seed, mode):
    rng = np.random.default_rng(seed)
    p = GasParams(1.4)
    g = build_grid(6, 3.0)
    c = derive_constants(3.0, 0.1, 1.0, 1.0, p)
    prof = random_profile(g, int(rng.integers(0, 2)), rng)
    _new, art = step(prof, config(g, p, c, mode), BoundState.initial(prof, c, p))
    assert np.all(art.jensen_gap >= -1e-13)
    assert np.all(art.weighted_remainder >= 0)


def test_cutoff_mode_creates_states_inside_the_region(rng):
    p = GasParams(1.4)
    g = build_grid(20, 4.0)
    prof = random_profile(g, 0, rng, 0.5, 3.0, vscale=2.0)
    c = derive_constants(4.0, 0.1, prof.mass(), prof.energy(p), p)
    cfg = config(g, p, c, CUTOFF)
    bound = BoundState.initial(prof, c, p)
    seen_cut = 0
    for _ in range(40):
        new, art = step(prof, cfg, bound)
        bound = l_update(bound, art)
        seen_cut += len(art.cutoff_indices)
        rep = containment_check(new, bound, c, p, tol=1e-12, I=art.I_next)
        assert rep.passed, rep.to_dict()
        prof = new
    assert seen_cut > 0


def test_raw_mode_aborts_after_too_many_clamps():
    p = GasParams(1.4)
    g = build_grid(10, 0.4)
    c = derive_constants(0.4, 0.1, 1.0, 1.0, p)
    rho = np.full(10, 1e-3)
    rho[4] = 5.0
    mom = np.zeros(10)
    mom[3], mom[5] = -0.5e-3, 0.5e-3
    prof = StaggeredProfile(0, rho, mom * 40, g)
    with pytest.raises(NumericalError, match="clamped"):
        run_period(prof, config(g, p, c, max_clamps=0), steps=20, record=False)


# -- period level ----------------------------------------------------------------

def smooth_data(amp=0.3):
    return lambda x: GasState(1 + amp * np.cos(np.pi * x), 0.5 * amp * np.sin(np.pi * x))


def test_mass_is_exact_without_forcing():
    p = GasParams(1.4)
    g = build_grid(25, 2.0)
    prof = project_initial(smooth_data(), g)
    c = derive_constants(2.0, 0.1, prof.mass(), prof.energy(p), p)
    res = run_period(prof, config(g, p, c), stride=10)
    mass = [pr.mass() for pr in res.trajectory]
    assert max(abs(m - mass[0]) for m in mass) < 1e-12


def test_runs_are_bit_identical(rng):
    p = GasParams(1.4)
    g = build_grid(10, 2.0)
    prof = project_initial(smooth_data(), g)
    c = derive_constants(2.0, 0.1, prof.mass(), prof.energy(p), p, kappa=0.3)
    cfg = config(g, p, c, CUTOFF, forcing=sinusoidal_forcing(0.3))
    a = run_period(prof, cfg, record=False)
    b = run_period(prof, cfg, record=False)
    assert np.array_equal(a.final.rho, b.final.rho) and np.array_equal(a.final.mom, b.final.mom)
    assert a.diagnostics == b.diagnostics


def test_invalid_mode_rejected(gas2):
    g = build_grid(4, 1.0)
    with pytest.raises(ValueError):
        config(g, gas2, bare_constants(), mode="semi")
    # gamma = 2 leaves no admissible fan exponent
    with pytest.raises(ConfigError):
        config(g, gas2, bare_constants(), mode=CUTOFF)


# -- consistency on a manufactured solution -------------------------------------

def test_local_truncation_error_is_first_order():
    r = truncation_errors((25, 50, 100, 200))
    assert order(r["dx"], r["l1"]) >= 0.9, r["l1"]
    assert order(r["dx"], r["interior"]) >= 0.9, r["interior"]


def test_wall_cell_defect_tends_to_twice_the_mass_correction():
    # the reflected ghost carries -R, so a wall cell picks up 2R = O(dt) per step
    p = GasParams(1.4)
    F = callable_forcing(manufactured_force(p.gamma), None)
    gaps = []
    for Nx in (200, 400, 800):
        g = build_grid(Nx, 2.0)
        c = derive_constants(2.0, 0.1, 1.0, 1.0, p)
        n = 2 * (g.Nt // 6)  # even, near t = 1/3 where the forcing moment is large
        prof = level(g, n)
        got, _ = step(prof, config(g, p, c, forcing=F))
        defect = got.rho[-1] - level(g, n + 1).rho[-1]
        R, _S = rs_corrections(prof, int(prof.indices[-1]), F, c, p)
        assert abs(R) / g.dt > 1e-3  # does not shrink with dx
        gaps.append(abs(1 - defect / (2 * R)))
    assert gaps[1] / gaps[0] < 0.6 and gaps[2] / gaps[1] < 0.6


# -- persistence -------------------------------------------------------------------

def test_trajectory_roundtrip_and_truncation(tmp_path, rng):
    p = GasParams(1.4)
    g = build_grid(5, 2.0)
    profs = [random_profile(g, n, rng) for n in range(3)]
    path = write_trajectory(tmp_path / "traj.csv", profs, p)
    back = read_trajectory(path, g)
    for a, b in zip(profs, back):
        assert a.n == b.n and np.array_equal(a.rho, b.rho) and np.array_equal(a.mom, b.mom)
    lines = path.read_text().splitlines()
    (tmp_path / "cut.csv").write_text("\n".join(lines[:-2]) + "\n")
    with pytest.raises(ConfigError, match="does not cover"):
        read_trajectory(tmp_path / "cut.csv", g)
    (tmp_path / "bad.csv").write_text("\n".join(lines[:3] + ["1,x"] + lines[3:]) + "\n")
    with pytest.raises(ConfigError, match=":4:"):
        read_trajectory(tmp_path / "bad.csv", g)

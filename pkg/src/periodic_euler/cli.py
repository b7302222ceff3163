"""Command-line driver: simulate, periodic, riemann, diagnose.

Exit codes: 0 ok, 2 configuration or input error, 3 numerical abort,
4 fixed-point iteration did not converge.
"""
from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bounds
from .errors import ConfigError, DivergenceError, DomainError, NumericalError
from .gas import GasParams, GasState, derive_constants, invariants_of, momentum_flux
from .mesh import (SHAPES, build_grid, project_initial, read_forcing_csv, read_initial_csv,
                   sinusoidal_forcing)
from .periodic import default_guess, find_fixed_point, from_shifted, write_history
from .riemann import FanParams, entropy_production, sample_riemann, solve_riemann
from .scheme import CUTOFF, RAW, StepperConfig, read_trajectory, run_period, write_trajectory

log = logging.getLogger("periodic_euler")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_DIVERGED = 0, 2, 3, 4
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO,
              "debug": logging.DEBUG}


@dataclass
class RunConfig:
    gamma: float = 1.4
    M: float = 10.0
    eps: float = 0.1
    kappa: float = 0.0
    Nx: int = 25
    mode: str = RAW
    forcing: str = "sin_pi"   # a shape name or a "t,x,F" CSV path
    initial: str = "rest"     # "rest", "wave" or an "x,rho,v" CSV path
    rho0: float = 1.0
    amp: float = 0.1
    periods: int = 1
    stride: int = 10
    out: str = "out"
    tol: float = 1e-8
    max_iter: int = 200
    damping: float = 0.5
    seed: int = 0
    c_tol: float = bounds.DEFAULT_C_TOL
    left: str = "1.0,0.0"
    right: str = "0.125,0.0"
    samples: int = 0

    def validate(self) -> "RunConfig":
        p = GasParams(self.gamma)  # raises for gamma <= 1
        if self.mode not in (RAW, CUTOFF):
            raise ConfigError(f"mode must be raw or cutoff, got {self.mode!r}")
        if self.mode == CUTOFF:
            if not p.in_standard_range:
                raise ConfigError(f"cutoff mode needs gamma <= 5/3, got {self.gamma}")
            FanParams().validate(p)
        if int(self.Nx) != self.Nx or self.Nx < 2:
            raise ConfigError(f"Nx must be an integer >= 2, got {self.Nx}")
        if self.kappa < 0:
            raise ConfigError("kappa must be non-negative")
        for name in ("periods", "stride"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.max_iter < 0:
            raise ConfigError("max_iter must be non-negative")
        if not 0.0 < self.damping <= 1.0:
            raise ConfigError("damping must lie in (0, 1]")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.rho0 <= 0:
            raise ConfigError("rho0 must be positive")
        derive_constants(self.M, self.eps, 1.0, 0.0, p)  # eps and M ranges
        return self

    @property
    def gas(self) -> GasParams:
        return GasParams(self.gamma)


FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}
_CASTS = {"float": float, "int": int, "str": str}


def _cast(name: str, raw):
    try:
        return _CASTS[FIELD_TYPES[name]](raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def load_config_file(path) -> dict:
    """Flatten every section of an INI file into RunConfig keys."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    out = {}
    for section in parser.sections():
        for key, raw in parser[section].items():
            if key not in FIELD_TYPES:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            out[key] = _cast(key, raw)
    return out


def build_config(args, base: dict | None = None) -> RunConfig:
    values = dict(base or {})
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    for name in FIELD_TYPES:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = _cast(name, v)
    return RunConfig(**values).validate()


# -- setup ---------------------------------------------------------------------

def make_forcing(cfg: RunConfig):
    if cfg.forcing in SHAPES:
        return sinusoidal_forcing(cfg.kappa, cfg.forcing)
    return read_forcing_csv(cfg.forcing)


def make_initial(cfg: RunConfig):
    if cfg.initial == "rest":
        return lambda x: GasState(np.full_like(x, cfg.rho0), np.zeros_like(x))
    if cfg.initial == "wave":
        a = cfg.amp
        return lambda x: GasState(cfg.rho0 * (1.0 + a * np.cos(np.pi * x)),
                                  cfg.rho0 * a * np.sin(np.pi * x))
    return read_initial_csv(cfg.initial)


def setup(cfg: RunConfig):
    p = cfg.gas
    grid = build_grid(cfg.Nx, cfg.M)
    initial = project_initial(make_initial(cfg), grid)
    c = derive_constants(cfg.M, cfg.eps, initial.mass(), initial.energy(p), p, kappa=cfg.kappa)
    forcing = make_forcing(cfg)
    sup = forcing.sup_norm()
    if sup > cfg.kappa * (1.0 + 1e-12):
        log.warning("forcing sup-norm %.4g exceeds the configured bound kappa=%.4g", sup, cfg.kappa)
    stepper = StepperConfig(cfg.mode, forcing, c, p, grid, c_tol=cfg.c_tol)
    return stepper, initial


# -- diagnostics shared by simulate and diagnose --------------------------------

def assess(profiles, accumulators: dict, stepper: StepperConfig) -> dict:
    """Verdicts computed only from stored profiles and the accumulator series."""
    c, p, grid = stepper.constants, stepper.gas, stepper.grid
    acc = {int(n): k for k, n in enumerate(accumulators["n"])}
    cg = bounds.c_gamma(p)
    worst = None
    first = None
    per_level = []
    for pr in profiles:
        k = acc.get(pr.n)
        if k is None:
            raise ConfigError(f"no accumulator entry for level n={pr.n}")
        I = bounds.i_functional(pr, c, p)
        state = bounds.BoundState(pr.n, accumulators["M_n"][k], accumulators["L_shock"][k],
                                  accumulators["L_jensen"][k], accumulators["L_remainder"][k],
                                  I, cg, 0.0)
        rep = bounds.containment_check(pr, state, c, p, tol=bounds.tolerance(grid.dx, stepper.c_tol),
                                       I=I)
        per_level.append(rep.worst)
        if worst is None or rep.worst < worst.worst:
            worst = rep
        if first is None and not rep.passed:
            # I carries a bad cell's zeta to its right, so the leftmost violation is the origin
            bad = np.minimum(rep.slack_lower, rep.slack_upper) < -rep.tol
            first = (pr.n, int(rep.indices[np.argmax(bad)]))
    em = bounds.energy_mass_report(profiles, stepper.forcing, c, p,
                                   jensen_total=accumulators["L_jensen"][-1],
                                   c_tol=stepper.c_tol)
    out = {
        "containment": {"passed": bool(worst.passed), "worst_slack": worst.worst,
                        "worst_n": worst.n, "worst_j": worst.worst_index, "tol": worst.tol,
                        "first_violation": None if first is None else list(first),
                        "per_level_worst": per_level},
        "energy_mass": em,
        "boundary_compat": bounds.boundary_compat_check(profiles[0], c, p),
    }
    last = profiles[-1]
    if last.n > 0 and last.n % grid.steps_per_period == 0:
        out["lemma44"] = bounds.lemma44_check(last, c, p)
    out["verdicts"] = {
        "containment": out["containment"]["passed"],
        "energy_inequality": em["energy_inequality_ok"],
        "gronwall": em["gronwall_ok"],
        "jensen": em.get("jensen_ok"),
        "boundary_compat": out["boundary_compat"]["passed"],
        "lemma44": out.get("lemma44", {}).get("passed"),
    }
    return out


def _describe(stepper: StepperConfig) -> dict:
    g = stepper.grid
    return {"grid": {"Nx": g.Nx, "M": g.M, "dx": g.dx, "dt": g.dt,
                     "steps_per_period": g.steps_per_period},
            "constants": dataclasses.asdict(stepper.constants)}


def _write_json(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, default=_jsonable))
    return path


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")


# -- commands ------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig) -> int:
    stepper, initial = setup(cfg)
    out = Path(cfg.out)
    steps = cfg.periods * stepper.grid.steps_per_period
    res = run_period(initial, stepper, steps=steps, stride=cfg.stride)
    traj = write_trajectory(out / "trajectory.csv", res.trajectory, stepper.gas)
    diag = {"config": dataclasses.asdict(cfg), **_describe(stepper),
            "accumulators": res.diagnostics["accumulators"],
            "events": {k: v for k, v in res.diagnostics.items() if k != "accumulators"},
            "assessment": assess(res.trajectory, res.diagnostics["accumulators"], stepper)}
    _write_json(out / "diagnostics.json", diag)
    log.info("wrote %s and diagnostics.json", traj)
    print(json.dumps(diag["assessment"]["verdicts"]))
    return EXIT_OK


def cmd_periodic(cfg: RunConfig) -> int:
    stepper, initial = setup(cfg)
    out = Path(cfg.out)
    guess = default_guess(stepper)
    try:
        x, report = find_fixed_point(guess, stepper, tol=cfg.tol, max_iter=cfg.max_iter,
                                     damping=cfg.damping)
    except DivergenceError as exc:
        report = exc.report
        write_history(out / "history.csv", report)
        _write_json(out / "report.json", report.to_dict())
        log.error("fixed-point iteration diverged: %s", exc)
        return EXIT_DIVERGED
    write_history(out / "history.csv", report)
    _write_json(out / "report.json", report.to_dict())
    if not report.converged:
        log.error("fixed-point iteration stopped: %s", report.message)
        print(json.dumps({"converged": False, "iterations": report.iterations}))
        return EXIT_DIVERGED
    orbit = run_period(from_shifted(x, stepper.constants, stepper.grid, stepper.gas), stepper,
                       stride=cfg.stride)
    write_trajectory(out / "orbit.csv", orbit.trajectory, stepper.gas)
    print(json.dumps({"converged": True, "iterations": report.iterations,
                      "certificate": report.certificate,
                      "periodicity_l1": report.periodicity_l1}))
    return EXIT_OK


def _parse_state(text: str) -> GasState:
    try:
        rho, v = (float(s) for s in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"expected 'rho,v', got {text!r}") from exc
    if rho < 0:
        raise ConfigError(f"negative density in {text!r}")
    return GasState(rho, rho * v)


def riemann_summary(uL: GasState, uR: GasState, p: GasParams) -> dict:
    sol = solve_riemann(uL, uR, p)
    shocks = []
    for sigma, a, b in sol.shocks():
        jump_rho = b.rho - a.rho
        jump_m = b.mom - a.mom
        res1 = abs((b.mom - a.mom) - sigma * jump_rho) / max(abs(b.mom) + abs(a.mom), 1e-300)
        f_a, f_b = momentum_flux(a, p), momentum_flux(b, p)
        res2 = abs((f_b - f_a) - sigma * jump_m) / max(abs(f_a) + abs(f_b), 1e-300)
        shocks.append({"speed": sigma, "entropy_production": float(entropy_production(sigma, a, b, p)),
                       "rh_residual": max(res1, res2)})
    return {
        "pattern": sol.pattern,
        "middle": {"rho": float(sol.middle.rho), "m": float(sol.middle.mom)},
        "wave1": sol.wave1.value, "wave2": sol.wave2.value,
        "speeds1": list(sol.speeds1), "speeds2": list(sol.speeds2),
        "shocks": shocks,
        "vacuum": sol.vacuum,
    }, sol


def cmd_riemann(cfg: RunConfig) -> int:
    p = cfg.gas
    uL, uR = _parse_state(cfg.left), _parse_state(cfg.right)
    summary, sol = riemann_summary(uL, uR, p)
    print(f"pattern: {summary['pattern']}")
    print(f"middle: rho={float(sol.middle.rho)!r} m={float(sol.middle.mom)!r}")
    print(f"1-wave {summary['wave1']}: speeds {summary['speeds1']}")
    print(f"2-wave {summary['wave2']}: speeds {summary['speeds2']}")
    for s in summary["shocks"]:
        print(f"shock speed {s['speed']!r}: entropy production {s['entropy_production']!r}, "
              f"RH residual {s['rh_residual']:.3e}")
    if cfg.samples > 0:
        lo = min(summary["speeds1"][0], -1.0) - 1.0
        hi = max(summary["speeds2"][1], 1.0) + 1.0
        path = Path(cfg.out) / "riemann.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w") as fh:
            fh.write("xi,rho,m,v,z,w\n")
            for xi in np.linspace(lo, hi, cfg.samples):
                u = sample_riemann(sol, float(xi), p)
                z, w = invariants_of(u, p)
                v = u.mom / u.rho if u.rho > 0 else 0.0
                fh.write(f"{float(xi)!r},{float(u.rho)!r},{float(u.mom)!r},{float(v)!r},{float(z)!r},{float(w)!r}\n")
    return EXIT_OK


def cmd_diagnose(cfg: RunConfig, trajectory: Path, accumulators: dict) -> int:
    stepper, _initial = setup(cfg)
    profiles = read_trajectory(trajectory, stepper.grid)
    result = assess(profiles, accumulators, stepper)
    result["decay"] = bounds.decay_diagnostic(stepper.constants, stepper.gas, seed=cfg.seed)
    _write_json(Path(cfg.out) / "verdict.json", result)
    print(json.dumps(result["verdicts"]))
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------

def _add_common(sp):
    d = RunConfig()
    sp.add_argument("--config", help="INI file; every section is read as key = value")
    sp.add_argument("--mode", choices=[RAW, CUTOFF], help=f"stepper mode (default {d.mode})")
    sp.add_argument("--nx", dest="Nx", type=int, help=f"cells per level, dx = 1/(2 Nx) (default {d.Nx})")
    sp.add_argument("--gamma", type=float, help=f"adiabatic exponent (default {d.gamma})")
    sp.add_argument("--bigM", dest="M", type=float, help=f"region scale M (default {d.M})")
    sp.add_argument("--eps", type=float, help=f"exponent shift in K (default {d.eps})")
    sp.add_argument("--kappa", type=float, help=f"forcing amplitude (default {d.kappa})")
    sp.add_argument("--forcing", help=f"shape {sorted(SHAPES)} or t,x,F CSV (default {d.forcing})")
    sp.add_argument("--initial", help=f"rest, wave or x,rho,v CSV (default {d.initial})")
    sp.add_argument("--rho0", type=float, help=f"base density (default {d.rho0})")
    sp.add_argument("--amp", type=float, help=f"amplitude of the wave data (default {d.amp})")
    sp.add_argument("--periods", type=int, help=f"periods to simulate (default {d.periods})")
    sp.add_argument("--stride", type=int, help=f"trajectory stride in steps (default {d.stride})")
    sp.add_argument("--out", help=f"output directory (default {d.out})")
    sp.add_argument("--tol", type=float, help=f"fixed-point sup tolerance (default {d.tol})")
    sp.add_argument("--max-iter", dest="max_iter", type=int,
                    help=f"fixed-point iterate budget (default {d.max_iter})")
    sp.add_argument("--damping", type=float, help=f"Picard damping in (0, 1] (default {d.damping})")
    sp.add_argument("--seed", type=int, help=f"seed for randomised checks (default {d.seed})")
    sp.add_argument("--c-tol", dest="c_tol", type=float,
                    help=f"constant in tol(dx) = c dx^1.05 (default {d.c_tol})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="periodic-euler",
                                     description="Time-periodic isentropic gas flow with forcing.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("simulate", "run the stepper and write trajectory plus diagnostics"),
                       ("periodic", "search for a time-periodic orbit by damped Picard iteration"),
                       ("riemann", "solve one Riemann problem"),
                       ("diagnose", "recompute diagnostics from a stored trajectory")):
        sp = sub.add_parser(name, help=text, description=text)
        _add_common(sp)
        if name == "riemann":
            sp.add_argument("--left", help="left state as rho,v (default 1.0,0.0)")
            sp.add_argument("--right", help="right state as rho,v (default 0.125,0.0)")
            sp.add_argument("--samples", type=int, help="rays to sample into riemann.csv (default 0)")
        if name == "diagnose":
            sp.add_argument("trajectory", help="trajectory CSV written by simulate")
    return parser


def _setup_logging():
    level = os.environ.get("EULER_LOG", "warn").lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        if args.command == "diagnose":
            traj = Path(args.trajectory)
            sibling = traj.parent / "diagnostics.json"
            if not sibling.is_file():
                raise ConfigError(f"{sibling} not found; diagnose needs the run's accumulators")
            stored = json.loads(sibling.read_text())
            base = {k: v for k, v in stored["config"].items() if k in FIELD_TYPES}
            base["out"] = str(traj.parent)
            cfg = build_config(args, base)
            return cmd_diagnose(cfg, traj, stored["accumulators"])
        cfg = build_config(args)
        return {"simulate": cmd_simulate, "periodic": cmd_periodic,
                "riemann": cmd_riemann}[args.command](cfg)
    except (ConfigError, DomainError, json.JSONDecodeError, KeyError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except DivergenceError as exc:
        log.error("%s", exc)
        return EXIT_DIVERGED
    except NumericalError as exc:
        log.error("numerical abort: %s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

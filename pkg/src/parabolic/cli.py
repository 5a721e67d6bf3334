"""Command-line front end: ``parabolic {solve,propagator,verify,constants}``.

Exit codes: 0 all checks pass, 1 a check failed, 2 bad configuration,
3 numeric failure. Reports are JSON with sorted keys; only
``metadata.timing`` varies between runs with the same config and seed.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from importlib import metadata as importlib_metadata
from pathlib import Path

import numpy as np
import scipy

from . import config as cfgmod
from . import time_analysis as ta
from .errors import NumericError, ParabolicError
from .heat_engine import SourceSpec, apriori_report, duhamel_solve, fourier_heat_solve, heat_constants
from .parabolic_engine import (
    CoefficientModel,
    FormFamily,
    cauchy_step_solve,
    convergence_order,
    energy_report,
    exact_ellipticity,
    exponential_shift_check,
    kaplan_coercivity,
    kaplan_report,
    kaplan_solve,
    max_interval_residual,
    energy_residuals,
    sampled_ellipticity,
)
from .propagator import propagator_report, represent, save_propagator
from .report import Report, inequality, residual
from .spectral_core import SpectralOperator
from .time_analysis import GridKind, TimeGrid, Trajectory

THREADS_ENV = "PARABOLIC_THREADS"
EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


# ---------------------------------------------------------------- shared checks


def ellipticity_checks(ff: FormFamily, probes: int, seed: int) -> Report:
    rep = sampled_ellipticity(ff, probes, seed)
    if ff.op.injective or (ff.kappa == 0 and ff.zeroth is None):
        m_true, nu_true = exact_ellipticity(ff)
        rep.add(
            inequality("boundedness_exact", m_true, ff.M, 1e-12 * ff.M, "uniform boundedness of the forms"),
            inequality("coercivity_exact", ff.nu, nu_true, 1e-12 * ff.nu, "uniform coercivity of the forms"),
        )
    return rep


def zero_data_check(u: Trajectory, tol: float, name: str = "zero_data") -> Report:
    return Report().add(residual(name, ta.sup_norm(u), tol, "uniqueness: zero data gives the zero solution"))


def relative_l2(u: Trajectory, ref: Trajectory, alpha: float = 0.0) -> float:
    den = ta.l2_norm(ref, alpha)
    num = ta.l2_norm(u - ref, alpha)
    return num / den if den > 0 else num


def energy_tolerance(ff: FormFamily, per_dt: float) -> float:
    lam = float(ff.shifted_op.eigenvalues[-1])
    return per_dt * (1 + lam**2)


# ---------------------------------------------------------------- scenarios


def heat_scenario(cfg: dict, out: Path | None) -> Report:
    grid = cfgmod.build_grid(cfg["grid"])
    op, _ = cfgmod.build_operator(cfg["operator"], grid, cfg["seed"])
    src = cfgmod.build_source(cfg["source"], op, grid, cfg["seed"])
    tol = cfg["tolerances"]
    solver = cfg["solver"] or "duhamel_linear"
    if solver == "fourier":
        u = fourier_heat_solve(op, src, grid)
    elif solver in ("duhamel", "duhamel_linear"):
        u = duhamel_solve(op, src, grid, "linear" if solver == "duhamel_linear" else "left")
    else:
        raise cfgmod.ConfigError(f"unknown heat solver {solver!r}")
    rep = Report()
    if src.is_zero():
        rep.extend(zero_data_check(u, tol["zero"]))
    else:
        rep.extend(apriori_report(op, src, u, tol["apriori_slack_per_dt"]), "apriori_")
        if grid.is_window and op.injective and solver != "fourier":
            ref = fourier_heat_solve(op, src, grid)
            rep.add(residual("duhamel_fourier_agreement", relative_l2(u, ref, 1.0), tol["agreement"],
                             "uniqueness in the homogeneous energy space"))
    if out is not None and cfg["outputs"].get("trajectory", True):
        ta.trajectory_to_csv(u, out / "trajectory.csv")
    return rep


def parabolic_scenario(cfg: dict, out: Path | None) -> Report:
    grid = cfgmod.build_grid(cfg["grid"])
    seed = cfg["seed"]
    op, native = cfgmod.build_operator(cfg["operator"], grid, seed)
    ff = cfgmod.build_form(cfg["form"], op, grid, native, seed)
    src = cfgmod.build_source(cfg["source"], op, grid, seed)
    a = cfgmod.build_initial(cfg["initial"], op, seed)
    tol = cfg["tolerances"]
    rep = Report().extend(ellipticity_checks(ff, int(tol["ellipticity_probes"]), seed), "ellipticity_")
    solver = cfg["solver"] or ("variational" if grid.is_window else "step")
    if solver == "variational":
        u = kaplan_solve(ff, src, grid)
        if src.is_zero():
            rep.extend(zero_data_check(u, tol["zero"]))
        else:
            rep.extend(kaplan_report(ff, src, u), "variational_")
    elif solver == "step":
        u = cauchy_step_solve(ff, a, src, grid, cfg["scheme"])
        rep.extend(energy_report(ff, u, src, energy_tolerance(ff, tol["energy_per_dt"])))
        if src.is_zero() and not np.any(a):
            rep.extend(zero_data_check(u, tol["zero"]))
    else:
        raise cfgmod.ConfigError(f"unknown parabolic solver {solver!r}")
    if out is not None and cfg["outputs"].get("trajectory", True):
        ta.trajectory_to_csv(u, out / "trajectory.csv")
    return rep


def propagator_scenario(cfg: dict, out: Path | None) -> Report:
    grid = cfgmod.build_grid(cfg["grid"])
    seed = cfg["seed"]
    op, native = cfgmod.build_operator(cfg["operator"], grid, seed)
    ff = cfgmod.build_form(cfg["form"], op, grid, native, seed)
    tol = cfg["tolerances"]
    rep = Report().extend(ellipticity_checks(ff, int(tol["ellipticity_probes"]), seed), "ellipticity_")
    fwd, bwd, prep = propagator_report(ff, grid, cfg["scheme"])
    rep.extend(prep)
    src = cfgmod.build_source(cfg["source"], op, grid, seed)
    a = cfgmod.build_initial(cfg["initial"], op, seed)
    if cfg["scheme"] == "implicit_euler":
        direct = cauchy_step_solve(ff, a, src, grid)
        rep.extend(representation_check(fwd, bwd, a, src, direct, tol))
    if ff.op.injective and ff.kappa == 0:
        rep.extend(exponential_shift_check(ff, 1.0, grid))
    if out is not None and cfg["outputs"].get("propagator", True):
        save_propagator(fwd, out / "propagator_forward.json")
        save_propagator(bwd, out / "propagator_backward.json")
    return rep


def representation_check(fwd, bwd, a, src: SourceSpec, direct: Trajectory, tol: dict) -> Report:
    rep_u = represent(fwd, bwd, a, src)
    dt = direct.grid.dt
    rel = relative_l2(rep_u, direct)
    if ta.l2_norm(direct) == 0:
        return Report().add(residual("representation", ta.sup_norm(rep_u), tol["zero"], "representation of the weak solution"))
    return Report().add(residual("representation", rel, tol["representation_per_dt"] * dt,
                                 "representation of the weak solution"))


def constants_scenario(cfg: dict, out: Path | None) -> Report:
    opts = cfg["constants"]
    alphas = opts.get("alphas", [-1.0, -0.75, -0.5, -0.25, 0.0, 0.5, 1.0])
    rep = Report()
    table = []
    for alpha in alphas:
        c, cp = heat_constants(float(alpha))
        table.append({"alpha": float(alpha), "C": c if math.isfinite(c) else "inf", "C_prime": cp})
    rep.tables["heat_constants"] = table
    rep.tables["hls_constants"] = [{"r": float(r), "C": ta.hls_constant(float(r))} for r in opts.get("hls_r", [2, 4, 8])]
    _, cp0 = heat_constants(0.0)
    _, cp1 = heat_constants(1.0)
    c_half, _ = heat_constants(-0.5)
    exact = 1 / (4 * math.sqrt(2))
    rep.add(
        residual("C_prime_at_0", abs(cp0 - 2**-0.5), 1e-12, "energy constant of the Duhamel bound at alpha = 0"),
        residual("C_prime_at_1", abs(cp1 - 1.0), 1e-12, "energy constant of the Duhamel bound at alpha = 1"),
        residual("C_squared_at_minus_half", abs(c_half**2 - exact) / exact, 1e-6, "sup-norm constant of the Duhamel bound at alpha = -1/2"),
        residual("hls_at_2", abs(ta.hls_constant(2.0) - 1.0), 1e-12, "Plancherel case of the Sobolev embedding"),
    )
    return rep


# ---------------------------------------------------------------- verify suite

VERIFY_OPERATORS = ("spread", "dirichlet", "fractional")
VERIFY_FORMS = ("identity", "rotation", "random_accretive")
VERIFY_GRIDS = ("bounded", "window")


def _verify_operator(name: str, dim: int, seed: int, grid: TimeGrid) -> SpectralOperator:
    if name == "spread":
        return SpectralOperator.from_eigenvalues(np.geomspace(0.5, 3.0, dim))
    if name == "dirichlet":
        op, _ = cfgmod.build_operator({"kind": "dirichlet", "n_modes": dim}, grid, seed)
        return op
    if name == "fractional":
        op, _ = cfgmod.build_operator({"kind": "fractional", "n_grid": dim + 1, "gamma": 0.5}, TimeGrid(0, 1, 2), seed)
        return op
    raise cfgmod.ConfigError(f"unknown verify operator {name!r}")


def _verify_source(op: SpectralOperator, grid: TimeGrid, seed: int, zero: bool, window: bool) -> SourceSpec:
    if zero:
        return SourceSpec.zero(op, grid)
    rng = np.random.default_rng(seed)
    v1 = rng.standard_normal(op.dim) + 1j * rng.standard_normal(op.dim)
    v2 = rng.standard_normal(op.dim) + 1j * rng.standard_normal(op.dim)
    if window:
        f2 = Trajectory.separable(op, grid, lambda t: np.exp(-(t**2)), v1)
        h1 = Trajectory.separable(op, grid, lambda t: np.exp(-((t - 1) ** 2)) * np.cos(2 * t), v2)
        return SourceSpec(op, grid, f2=f2, h1=h1)
    f2 = Trajectory.separable(op, grid, lambda t: np.cos(3 * t), v1)
    h1 = Trajectory.separable(op, grid, lambda t: 1 + t, v2)
    return SourceSpec(op, grid, f2=f2, h1=h1, diracs=((0.5 * (grid.t0 + grid.t1), v1),))


def verify_cell(spec: dict) -> tuple[Report, list[dict]]:
    """One (operator, form, grid) cell; returns its report and convergence rows."""
    op_name, form_name, grid_name = spec["operator"], spec["form"], spec["grid"]
    seed, zero, tol = spec["seed"], spec["zero_sources"], spec["tolerances"]
    dim = spec["dim"]
    if grid_name == "bounded":
        grid = TimeGrid(0.0, 1.0, spec["n_steps"], "bounded")
    elif grid_name == "window":
        grid = TimeGrid(-8.0, 8.0, spec["window_steps"], "full_line_window")
    else:
        raise cfgmod.ConfigError(f"unknown verify grid {grid_name!r}")
    op = _verify_operator(op_name, dim, seed, grid)
    overrides = spec["form_overrides"]
    model = CoefficientModel(form_name, op.dim, seed=seed, M=overrides.get("M"), nu=overrides.get("nu"))
    ff = model.family(op, grid)
    rep = Report().extend(ellipticity_checks(ff, int(tol["ellipticity_probes"]), seed), "ellipticity_")
    src = _verify_source(op, grid, seed, zero, grid.is_window)
    rows: list[dict] = []
    if form_name == "identity" and not zero:
        # the identity form is the abstract heat equation
        u_heat = duhamel_solve(op, src, grid, "linear")
        rep.extend(apriori_report(op, src, u_heat, tol["apriori_slack_per_dt"]), "heat_")
        if grid.is_window:
            ref = fourier_heat_solve(op, src, grid)
            rep.add(residual("heat_duhamel_fourier_agreement", relative_l2(u_heat, ref, 1.0), tol["agreement"],
                             "uniqueness in the homogeneous energy space"))
    if grid.is_window:
        u = kaplan_solve(ff, src, grid)
        if zero:
            rep.extend(zero_data_check(u, tol["zero"]))
        else:
            rep.extend(kaplan_report(ff, src, u), "variational_")
        rng = np.random.default_rng(seed + 7)
        worst = math.inf
        for _ in range(int(spec["kaplan_probes"])):
            vals = rng.standard_normal((grid.n_steps + 1, op.dim)) + 1j * rng.standard_normal((grid.n_steps + 1, op.dim))
            vals[-1] = vals[0]
            lhs, rhs = kaplan_coercivity(ff, Trajectory(grid, op, vals))
            worst = min(worst, lhs - rhs)
        rep.add(inequality("hidden_coercivity_random", -worst, 0.0, 1e-8, "hidden coercivity of the modified form"))
        return rep, rows

    a = np.zeros(op.dim, dtype=complex) if zero else np.random.default_rng(seed + 3).standard_normal(op.dim) + 0j
    u = cauchy_step_solve(ff, a, src, grid)
    rep.extend(energy_report(ff, u, src, energy_tolerance(ff, tol["energy_per_dt"])))
    if zero:
        rep.extend(zero_data_check(u, tol["zero"]))
        rep.add(residual("energy_equality_zero_data", rep["energy_equality"].value, 0.0, "energy equality of the weak solution"))
    else:
        fine = grid.refined()
        ff2 = model.family(op, fine)
        src2 = _verify_source(op, fine, seed, zero, False)
        u2 = cauchy_step_solve(ff2, a, src2, fine)
        r1 = max_interval_residual(energy_residuals(ff, u, src))
        r2 = max_interval_residual(energy_residuals(ff2, u2, src2))
        order = convergence_order([grid.dt, fine.dt], [r1, r2])[0]
        rows = [{"dt": grid.dt, "residual": r1, "order": None}, {"dt": fine.dt, "residual": r2, "order": order}]
        rep.add(
            inequality("energy_order_low", tol["order_min"], order, 0.0, "energy equality of the weak solution"),
            inequality("energy_order_high", order, tol["order_max"], 0.0, "energy equality of the weak solution"),
        )
    fwd, bwd, prep = propagator_report(ff, grid)
    rep.extend(prep, "propagator_")
    rep.extend(representation_check(fwd, bwd, a, src, u, tol))
    rep.extend(exponential_shift_check(ff, 1.0, grid))
    return rep, rows


def verify_suite(cfg: dict, threads: int = 1) -> Report:
    opts = cfg["verify"]
    cells = []
    for op_name in opts.get("operators", VERIFY_OPERATORS):
        for form_name in opts.get("forms", VERIFY_FORMS):
            for grid_name in opts.get("grids", VERIFY_GRIDS):
                cells.append({
                    "operator": op_name, "form": form_name, "grid": grid_name, "seed": cfg["seed"],
                    "dim": int(opts.get("dim", 8)), "n_steps": int(opts.get("n_steps", 64)),
                    "window_steps": int(opts.get("window_steps", 256)),
                    "zero_sources": bool(opts.get("zero_sources", False)),
                    "form_overrides": dict(opts.get("form_overrides", {})),
                    "kaplan_probes": int(opts.get("kaplan_probes", 10)),
                    "tolerances": cfg["tolerances"],
                })
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(verify_cell, cells))
    rep = Report()
    table = []
    for cell, (crep, rows) in zip(cells, results):
        tag = f"{cell['operator']}/{cell['form']}/{cell['grid']}"
        rep.extend(crep, tag + "/")
        for r in rows:
            table.append({"cell": tag, **r})
    rep.tables["convergence"] = table
    return rep


# ---------------------------------------------------------------- driver

SCENARIO_FUNCS = {
    "heat": heat_scenario,
    "parabolic": parabolic_scenario,
    "propagator": propagator_scenario,
    "constants": constants_scenario,
}


def _versions() -> dict:
    try:
        pkg = importlib_metadata.version("artifact")
    except importlib_metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"artifact": pkg, "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()}


def run(cfg: dict, out: Path | None = None, threads: int = 1) -> dict:
    """Execute a validated config; returns the report document (also written to ``out``)."""
    start = time.perf_counter()
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    if cfg["scenario"] == "verify":
        rep = verify_suite(cfg, threads)
    else:
        rep = SCENARIO_FUNCS[cfg["scenario"]](cfg, out)
    doc = rep.to_dict()
    doc["metadata"] = {
        "scenario": cfg["scenario"],
        "seed": cfg["seed"],
        "config_hash": cfgmod.config_hash(cfg),
        "versions": _versions(),
        "timing": {"wall_seconds": time.perf_counter() - start},
    }
    if out is not None:
        (out / "report.json").write_text(json.dumps(doc, indent=1, sort_keys=True))
        table = doc["tables"].get("convergence")
        if table and cfg["outputs"].get("convergence", True):
            with open(out / "convergence.csv", "w", newline="") as fh:
                writer = csv.DictWriter(fh, fieldnames=["cell", "dt", "residual", "order"])
                writer.writeheader()
                for row in table:
                    writer.writerow({k: ("" if v is None else (f"{v:.17g}" if isinstance(v, float) else v)) for k, v in row.items()})
    return doc


def resolve_threads(flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise cfgmod.ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}")
    return min(4, os.cpu_count() or 1)


COMMAND_SCENARIOS = {"solve": ("heat", "parabolic"), "propagator": ("propagator",), "verify": ("verify",), "constants": ("constants",)}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="parabolic", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("solve", "run a heat or parabolic solve"),
        ("propagator", "assemble and check Green families"),
        ("verify", "run the verification matrix"),
        ("constants", "tabulate the closed-form constants"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, required=name in ("solve", "propagator"))
        p.add_argument("--out", type=Path, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None, help=f"worker threads (else ${THREADS_ENV})")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config is not None:
            raw = cfgmod.load(args.config)
        else:
            raw = cfgmod.validate({"scenario": COMMAND_SCENARIOS[args.command][0]})
        if raw["scenario"] not in COMMAND_SCENARIOS[args.command]:
            raise cfgmod.ConfigError(f"scenario {raw['scenario']!r} does not belong to the {args.command} command")
        if args.seed is not None:
            raw["seed"] = args.seed
        doc = run(raw, args.out, resolve_threads(args.threads))
    except NumericError as exc:
        print(json.dumps({"error": "numeric", "type": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_NUMERIC
    except (ParabolicError, ValueError, KeyError, TypeError) as exc:
        print(json.dumps({"error": "config", "type": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    failed = [c for c in doc["checks"] if not c["pass"]]
    summary = {"scenario": raw["scenario"], "checks": len(doc["checks"]), "failed": [c["name"] for c in failed]}
    print(json.dumps(summary))
    return EXIT_CHECK if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

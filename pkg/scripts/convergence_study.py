"""Time-step refinement studies for the heat and parabolic solvers.

Prints one table per study (step size, error, observed order) and optionally
writes them to a CSV file.

    python3 scripts/convergence_study.py [--csv runs/convergence.csv] [--seed 0]
"""

import argparse
import csv
import math
import sys
from pathlib import Path

import numpy as np

from parabolic import SourceSpec, SpectralOperator, TimeGrid, Trajectory
from parabolic import time_analysis as ta
from parabolic.applications import DirichletSpec, dirichlet_operator
from parabolic.heat_engine import duhamel_solve, fourier_heat_solve
from parabolic.parabolic_engine import (
    CoefficientModel,
    cauchy_step_solve,
    convergence_order,
    energy_residuals,
    max_interval_residual,
)
from parabolic.propagator import assemble_green, max_block_difference, restrict


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def duhamel_vs_fourier(seed: int):
    op = SpectralOperator.from_eigenvalues([0.5, 1.0, 2.0, 3.0])
    rng = np.random.default_rng(seed)
    a, b = crandn(rng, 4), crandn(rng, 4)
    rows = {"left": [], "linear": []}
    for n in (256, 512, 1024, 2048):
        grid = TimeGrid(-20.0, 20.0, n, "full_line_window")
        src = SourceSpec(
            op, grid,
            h1=Trajectory.separable(op, grid, lambda t: np.exp(-(t**2) / 4), a),
            f2=Trajectory.separable(op, grid, lambda t: np.exp(-((t - 1) ** 2)) * np.cos(2 * t), b),
        )
        ref = fourier_heat_solve(op, src, grid)
        for sampling in rows:
            u = duhamel_solve(op, src, grid, sampling=sampling)
            rows[sampling].append((grid.dt, ta.l2_norm(u - ref, 1.0) / ta.l2_norm(ref, 1.0)))
    return {f"duhamel_{k}_vs_fourier": v for k, v in rows.items()}


def energy_equality(seed: int):
    op = SpectralOperator.from_eigenvalues(np.geomspace(0.5, 3.0, 6))
    rng = np.random.default_rng(seed)
    a, h = crandn(rng, 6), crandn(rng, 6)
    out = {}
    for scheme in ("implicit_euler", "crank_nicolson"):
        rows = []
        for n in (32, 64, 128, 256, 512):
            grid = TimeGrid(0.0, 1.0, n)
            ff = CoefficientModel("random_accretive", 6, seed=seed).family(op, grid)
            src = SourceSpec(op, grid, h1=Trajectory.separable(op, grid, lambda t: np.cos(3 * t), h))
            u = cauchy_step_solve(ff, a, src, grid, scheme)
            rows.append((grid.dt, max_interval_residual(energy_residuals(ff, u, src)) / ta.sup_norm(u) ** 2))
        out[f"energy_{scheme}"] = rows
    return out


def propagator_refinement(seed: int):
    op = SpectralOperator.from_eigenvalues(np.geomspace(0.5, 3.0, 6))
    rows = []
    for n in (16, 32, 64, 128):
        grid = TimeGrid(0.0, 1.0, n)
        model = CoefficientModel("random_accretive", 6, seed=seed)
        coarse = assemble_green(model.family(op, grid), grid)
        fine = assemble_green(model.family(op, grid.refined()), grid.refined())
        rows.append((grid.dt, max_block_difference(coarse, restrict(fine, 2))))
    return {"green_vs_refined_green": rows}


def dirichlet_heat_kernel():
    rows = []
    one = lambda t, x: np.ones_like(x)
    for n in (50, 100, 200, 400):
        grid = TimeGrid(0.0, 0.5, n)
        op, ff = dirichlet_operator(DirichletSpec(math.pi, 6, one), grid)
        blocks = assemble_green(ff, grid).dense()
        lag = np.subtract.outer(grid.times, grid.times)[:, :, None, None]
        exact = np.where(lag >= 0, np.exp(-np.clip(lag, 0, None) * op.eigenvalues**2) * np.eye(6), 0.0)
        rows.append((grid.dt, float(np.max(np.abs(blocks - exact)))))
    return {"dirichlet_green_vs_heat_kernel": rows}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--csv", type=Path, default=None)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    studies = {}
    studies.update(duhamel_vs_fourier(args.seed))
    studies.update(energy_equality(args.seed))
    studies.update(propagator_refinement(args.seed))
    studies.update(dirichlet_heat_kernel())

    records = []
    for name, rows in studies.items():
        dts, errs = zip(*rows)
        orders = [None] + convergence_order(dts, errs)
        print(f"\n{name}")
        print(f"  {'dt':>10s} {'error':>12s} {'order':>7s}")
        for dt, err, order in zip(dts, errs, orders):
            print(f"  {dt:10.4g} {err:12.4e} {'' if order is None else f'{order:7.2f}'}")
            records.append({"study": name, "dt": dt, "error": err, "order": "" if order is None else order})
    if args.csv is not None:
        args.csv.parent.mkdir(parents=True, exist_ok=True)
        with open(args.csv, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["study", "dt", "error", "order"])
            writer.writeheader()
            writer.writerows(records)
    return 0


if __name__ == "__main__":
    sys.exit(main())

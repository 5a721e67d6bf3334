"""Strict JSON run configuration.

Every section is a flat dict with a fixed key set; unknown keys are errors so
that a misspelt tolerance name cannot silently fall back to its default.
The README documents the full schema; ``DEFAULTS`` below is the reference.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .applications import (
    DirichletSpec,
    FractionalKernelSpec,
    WeightSpec,
    degenerate_operator,
    dirichlet_operator,
    fractional_operator,
    random_kernel,
)
from .errors import ParabolicError, SpecError
from .heat_engine import SourceSpec
from .parabolic_engine import SCHEMES, CoefficientModel, FormFamily
from .spectral_core import SpectralOperator, operator_from_dict
from .time_analysis import TimeGrid, Trajectory


class ConfigError(SpecError):
    """The configuration document is malformed."""


SCENARIOS = ("heat", "parabolic", "propagator", "verify", "constants")

DEFAULTS = {
    "scenario": None,
    "seed": 0,
    "operator": {"kind": "eigenvalues", "values": [0.5, 1.0, 1.5, 2.0]},
    "form": {"kind": "identity"},
    "grid": {"t0": 0.0, "t1": 1.0, "n_steps": 64, "kind": "bounded"},
    "source": None,
    "initial": "zero",
    "solver": None,
    "scheme": "implicit_euler",
    "tolerances": {},
    "outputs": {},
    "constants": {},
    "verify": {},
}

SECTION_KEYS = {
    "operator": {
        "eigenvalues": {"kind", "values"},
        "matrix": {"kind", "matrix"},
        "random": {"kind", "dim", "lo", "hi"},
        "dirichlet": {"kind", "length", "n_modes", "coefficient"},
        "fractional": {"kind", "gamma", "n_grid", "lambda_ell", "kernel", "value"},
        "degenerate": {"kind", "weight", "coefficient"},
    },
    "form": {"kind", "M", "nu", "kappa", "lambda_shift", "zeroth", "omega", "seed"},
    "grid": {"t0", "t1", "n_steps", "kind"},
    "source": {"f2", "g", "beta", "h1", "diracs"},
    "profile": {"profile", "vector", "scale", "center", "width", "frequency"},
    "dirac": {"time", "mass"},
    "weight": {"lo", "hi", "n_cells", "preset", "params", "samples"},
    "tolerances": {"residual", "energy_per_dt", "agreement", "apriori_slack_per_dt", "ellipticity_probes",
                   "order_min", "order_max", "representation_per_dt", "shift", "zero"},
    "outputs": {"trajectory", "propagator", "convergence"},
    "constants": {"alphas", "hls_r"},
    "verify": {"n_steps", "window_steps", "dim", "zero_sources", "operators", "forms", "grids", "form_overrides",
               "kaplan_probes"},
}

TOLERANCES = {
    "residual": 1e-12,
    "energy_per_dt": 1.0,
    "agreement": 1e-3,
    "apriori_slack_per_dt": 1.0,
    "ellipticity_probes": 64,
    "order_min": 0.8,
    "order_max": 2.2,
    "representation_per_dt": 5.0,
    "shift": 1e-10,
    "zero": 1e-12,
}

PROFILES = ("gaussian", "cosine", "constant", "bump")


def _strict(doc, allowed: set, where: str) -> dict:
    if not isinstance(doc, dict):
        raise ConfigError(f"{where} must be an object")
    extra = set(doc) - allowed
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(extra))}")
    return doc


def validate(doc: dict) -> dict:
    """Fill defaults and reject unknown keys; returns a new document."""
    _strict(doc, set(DEFAULTS), "config")
    cfg = copy.deepcopy(DEFAULTS)
    cfg.update(copy.deepcopy(doc))
    if cfg["scenario"] not in SCENARIOS:
        raise ConfigError(f"scenario must be one of {', '.join(SCENARIOS)}")
    if not isinstance(cfg["seed"], int) or isinstance(cfg["seed"], bool):
        raise ConfigError("seed must be an integer")
    kind = _strict(cfg["operator"], {"kind"} | set().union(*SECTION_KEYS["operator"].values()), "operator").get("kind")
    if kind not in SECTION_KEYS["operator"]:
        raise ConfigError(f"unknown operator kind {kind!r}")
    _strict(cfg["operator"], SECTION_KEYS["operator"][kind], f"operator ({kind})")
    if kind == "degenerate" and "weight" in cfg["operator"]:
        _strict(cfg["operator"]["weight"], SECTION_KEYS["weight"], "operator.weight")
    _strict(cfg["form"], SECTION_KEYS["form"], "form")
    _strict(cfg["grid"], SECTION_KEYS["grid"], "grid")
    if cfg["source"] is not None:
        _strict(cfg["source"], SECTION_KEYS["source"], "source")
        for part in ("f2", "g", "h1"):
            if cfg["source"].get(part) is not None:
                prof = _strict(cfg["source"][part], SECTION_KEYS["profile"], f"source.{part}")
                if prof.get("profile") not in PROFILES:
                    raise ConfigError(f"source.{part}.profile must be one of {', '.join(PROFILES)}")
        for i, d in enumerate(cfg["source"].get("diracs", [])):
            _strict(d, SECTION_KEYS["dirac"], f"source.diracs[{i}]")
    for sec in ("tolerances", "outputs", "constants", "verify"):
        _strict(cfg[sec], SECTION_KEYS[sec], sec)
    if cfg["scheme"] not in SCHEMES:
        raise ConfigError(f"scheme must be one of {', '.join(SCHEMES)}")
    tol = dict(TOLERANCES)
    tol.update(cfg["tolerances"])
    cfg["tolerances"] = tol
    return cfg


def load(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return validate(doc)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


# ---------------------------------------------------------------- builders


def build_grid(doc: dict) -> TimeGrid:
    try:
        return TimeGrid(float(doc["t0"]), float(doc["t1"]), int(doc["n_steps"]), doc.get("kind", "bounded"))
    except KeyError as exc:
        raise ConfigError(f"grid is missing {exc}") from exc
    except ValueError as exc:
        if isinstance(exc, ParabolicError):
            raise
        raise ConfigError(f"bad grid: {exc}") from exc


def _dirichlet_coefficient(name: str):
    if name == "identity":
        return (lambda t, x: np.ones_like(x)), 1.0, 1.0
    if name == "sin_time":
        return (lambda t, x: (1 + 0.5 * math.sin(t)) * np.ones_like(x)), 1.5, 0.5
    if name == "bump_space":
        return (lambda t, x: 1 + 0.5 * np.sin(x) ** 2 * (1 + math.cos(t)) / 2), 1.5, 1.0
    raise ConfigError(f"unknown Dirichlet coefficient {name!r}")


def build_operator(doc: dict, grid: TimeGrid, seed: int) -> tuple[SpectralOperator, FormFamily | None]:
    """Operator plus, for the applications, its native form family on ``grid``."""
    kind = doc["kind"]
    if kind == "eigenvalues":
        return operator_from_dict({"eigenvalues": doc["values"]}), None
    if kind == "matrix":
        return operator_from_dict({"matrix": doc["matrix"]}), None
    if kind == "random":
        rng = np.random.default_rng(seed)
        dim = int(doc.get("dim", 8))
        vals = np.sort(rng.uniform(float(doc.get("lo", 0.5)), float(doc.get("hi", 3.0)), size=dim))
        return SpectralOperator.from_eigenvalues(vals), None
    if kind == "dirichlet":
        fn, m, nu = _dirichlet_coefficient(doc.get("coefficient", "identity"))
        spec = DirichletSpec(float(doc.get("length", math.pi)), int(doc.get("n_modes", 8)), fn, m, nu)
        return dirichlet_operator(spec, grid)
    if kind == "fractional":
        lam = float(doc.get("lambda_ell", 1.0))
        kern = doc.get("kernel", "constant")
        if kern == "constant":
            value = float(doc.get("value", 1.0))
            kernel = lambda t, x, y: value * np.ones_like(x)
        elif kern == "random":
            kernel = random_kernel(seed, lam)
        else:
            kernel = np.array(kern, dtype=complex)
        spec = FractionalKernelSpec(float(doc.get("gamma", 0.5)), int(doc.get("n_grid", 9)), kernel, lam)
        return fractional_operator(spec, grid)
    if kind == "degenerate":
        w = dict(doc.get("weight", {}))
        if "samples" in w:
            w["samples"] = tuple(float(x) for x in w["samples"])
        spec = WeightSpec(seed=seed, **w)
        coeff = doc.get("coefficient", "weight")
        if coeff == "weight":
            return degenerate_operator(spec, grid)
        if coeff == "oscillating":
            fn = lambda t, x, wf: wf * (1.25 + 0.25 * math.sin(t)) * (1 + 0.2j * np.cos(x))
            return degenerate_operator(spec, grid, fn, nu=1.0, M=1.6)
        raise ConfigError(f"unknown degenerate coefficient {coeff!r}")
    raise ConfigError(f"unknown operator kind {kind!r}")


def build_form(doc: dict, op: SpectralOperator, grid: TimeGrid, native: FormFamily | None, seed: int) -> FormFamily:
    kind = doc.get("kind", "identity")
    if kind == "native":
        if native is None:
            raise ConfigError("form kind 'native' needs an application operator")
        ff = native
        if "M" in doc or "nu" in doc:
            from dataclasses import replace

            ff = replace(ff, M=float(doc.get("M", ff.M)), nu=float(doc.get("nu", ff.nu)))
    else:
        model = CoefficientModel(
            kind, op.dim, seed=int(doc.get("seed", seed)),
            M=None if "M" not in doc else float(doc["M"]), nu=None if "nu" not in doc else float(doc["nu"]),
            kappa=float(doc.get("kappa", 0.0)), lambda_shift=float(doc.get("lambda_shift", 0.0)),
            zeroth_scale=float(doc.get("zeroth", 0.0)),
        )
        ff = model.family(op, grid)
    omega = float(doc.get("omega", 0.0))
    return ff.shifted(omega) if omega else ff


def _profile_fn(doc: dict):
    name = doc["profile"]
    c = float(doc.get("center", 0.0))
    w = float(doc.get("width", 1.0))
    fr = float(doc.get("frequency", 1.0))
    if name == "gaussian":
        return lambda t: np.exp(-(((t - c) / w) ** 2))
    if name == "cosine":
        return lambda t: np.cos(fr * (t - c))
    if name == "constant":
        return lambda t: np.ones_like(t)
    # compactly supported smooth bump on (c - w, c + w)
    def bump(t):
        y = (np.asarray(t) - c) / w
        out = np.zeros_like(y, dtype=float)
        inside = np.abs(y) < 1
        out[inside] = np.exp(1 - 1 / (1 - y[inside] ** 2))
        return out

    return bump


def _vector(spec, dim: int, rng: np.random.Generator) -> np.ndarray:
    if spec is None or spec == "ones":
        return np.ones(dim, dtype=complex)
    if spec == "random":
        return rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    if spec == "zero":
        return np.zeros(dim, dtype=complex)
    v = np.array([complex(x[0], x[1]) if isinstance(x, list) else complex(x) for x in spec])
    if v.shape != (dim,):
        raise ConfigError(f"vector has length {v.size}, operator dimension is {dim}")
    return v


def build_source(doc: dict | None, op: SpectralOperator, grid: TimeGrid, seed: int) -> SourceSpec:
    if doc is None:
        return SourceSpec.zero(op, grid)
    rng = np.random.default_rng(seed + 1)
    parts = {}
    for name in ("f2", "g", "h1"):
        p = doc.get(name)
        if p is None:
            continue
        vec = _vector(p.get("vector"), op.dim, rng) * float(p.get("scale", 1.0))
        parts[name] = Trajectory.separable(op, grid, _profile_fn(p), vec)
    diracs = tuple((float(d["time"]), _vector(d.get("mass"), op.dim, rng)) for d in doc.get("diracs", []))
    if not parts and not diracs:
        return SourceSpec.zero(op, grid)
    return SourceSpec(op, grid, parts.get("f2"), parts.get("g"), float(doc.get("beta", 0.0)), parts.get("h1"), diracs)


def build_initial(spec, op: SpectralOperator, seed: int) -> np.ndarray:
    return _vector(spec, op.dim, np.random.default_rng(seed + 2))

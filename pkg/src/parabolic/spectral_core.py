"""Finite-dimensional positive self-adjoint operators and their functional calculus.

An operator is stored by its eigen-decomposition. Vectors handed to the
functions below are plain complex arrays of *eigencoordinates*; ``to_eigen``
and ``from_eigen`` convert from and to the ambient coordinates of the matrix
the operator was built from.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate, linalg
from scipy.integrate import trapezoid

from .errors import ArgumentError, DomainError, SpecError

CLAMP_RTOL = 1e-12  # eigenvalues below CLAMP_RTOL * lambda_max are set to exactly 0
ORTHO_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SpectralOperator:
    eigenvalues: np.ndarray
    basis: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float).copy()
        basis = np.asarray(self.basis, dtype=complex).copy()
        if lam.ndim != 1 or lam.size == 0:
            raise SpecError("eigenvalues must be a non-empty vector")
        if basis.shape != (lam.size, lam.size):
            raise SpecError(f"basis shape {basis.shape} does not match dim {lam.size}")
        if not np.all(np.isfinite(lam)) or np.any(lam < 0):
            raise SpecError("eigenvalues must be finite and nonnegative")
        if np.any(np.diff(lam) < 0):
            raise SpecError("eigenvalues must be sorted ascending")
        if np.max(np.abs(basis.conj().T @ basis - np.eye(lam.size))) > 1e3 * ORTHO_TOL * lam.size:
            raise SpecError("basis is not unitary")
        lam.setflags(write=False)
        basis.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "basis", basis)

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    @property
    def injective(self) -> bool:
        return bool(self.eigenvalues[0] > 0)

    @property
    def has_identity_basis(self) -> bool:
        return bool(np.array_equal(self.basis, np.eye(self.dim)))

    @classmethod
    def from_eigenvalues(cls, eigenvalues, basis=None) -> "SpectralOperator":
        lam = np.asarray(eigenvalues, dtype=float)
        order = np.argsort(lam, kind="stable")
        if basis is None:
            basis = np.eye(lam.size)
        basis = np.asarray(basis, dtype=complex)[:, order]
        return cls(lam[order], basis)

    @classmethod
    def from_matrix(cls, matrix) -> "SpectralOperator":
        m = np.asarray(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise SpecError("operator matrix must be square")
        scale = max(np.max(np.abs(m)), 1.0)
        if np.max(np.abs(m - m.conj().T)) > 1e-10 * scale:
            raise SpecError("operator matrix is not Hermitian")
        lam, vec = linalg.eigh(0.5 * (m + m.conj().T))
        if lam[0] < -1e-10 * max(abs(lam[-1]), 1.0):
            raise SpecError(f"operator matrix is not positive: eigenvalue {lam[0]:.3e}")
        lam = np.where(lam < CLAMP_RTOL * max(lam[-1], 0.0), 0.0, lam)
        return cls(lam, vec)

    def matrix(self) -> np.ndarray:
        """Ambient-coordinate matrix basis @ diag(eigenvalues) @ basis*."""
        return (self.basis * self.eigenvalues) @ self.basis.conj().T

    def to_eigen(self, x) -> np.ndarray:
        return self.basis.conj().T @ np.asarray(x, dtype=complex)

    def from_eigen(self, v) -> np.ndarray:
        return self.basis @ np.asarray(v, dtype=complex)

    def coords(self, v) -> np.ndarray:
        """Validate an eigencoordinate vector (or a stack of them, last axis = dim)."""
        arr = np.asarray(v, dtype=complex)
        if arr.shape[-1:] != (self.dim,):
            raise SpecError(f"vector has trailing length {arr.shape[-1:]} but operator dim is {self.dim}")
        return arr

    def power_factors(self, alpha: float) -> np.ndarray:
        """Multipliers lambda_i**alpha, with 0**0 = 1."""
        if alpha < 0 and not self.injective:
            raise DomainError("S not injective")
        if alpha == 0:
            return np.ones(self.dim)
        return self.eigenvalues ** alpha


def apply_function(op: SpectralOperator, f: Callable, v) -> np.ndarray:
    v = op.coords(v)
    vals = np.array([complex(f(lam)) for lam in op.eigenvalues])
    bad = ~np.isfinite(vals)
    if np.any(bad):
        raise DomainError(f"function is not finite at eigenvalue {op.eigenvalues[bad][0]!r}")
    return vals * v


def fractional_power(op: SpectralOperator, alpha: float, v) -> np.ndarray:
    return op.power_factors(alpha) * op.coords(v)


def homogeneous_norm(op: SpectralOperator, alpha: float, v) -> float:
    return float(np.linalg.norm(fractional_power(op, alpha, v)))


def shift(op: SpectralOperator, lam: float) -> SpectralOperator:
    """Inhomogeneous version (lam^2 + S^2)^(1/2); same eigenbasis."""
    if lam < 0:
        raise ArgumentError("shift parameter must be nonnegative")
    if lam == 0:
        return op
    return SpectralOperator(np.hypot(lam, op.eigenvalues), op.basis)


def kernel_split(op: SpectralOperator, v) -> tuple[np.ndarray, np.ndarray]:
    """Orthogonal split v = v_ran + v_nul along the closure of ran(S) and nul(S)."""
    v = op.coords(v)
    nul = op.eigenvalues == 0
    return np.where(nul, 0, v), np.where(nul, v, 0)


def _bump(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


@dataclass(frozen=True)
class CalderonProfile:
    """Smooth bump in log t, supported on exp(-half_width) < t < exp(half_width).

    Scaled so that the integral of phi(t) dt/t equals 1; ``normalization``
    records that integral as re-measured on the stored log-grid table.
    """

    half_width: float = 1.0
    nodes_per_decade: int = 512
    scale: float = field(init=False)
    log_nodes: np.ndarray = field(init=False, repr=False)
    values: np.ndarray = field(init=False, repr=False)
    normalization: float = field(init=False)

    def __post_init__(self):
        if self.half_width <= 0:
            raise ArgumentError("half_width must be positive")
        mass, _ = integrate.quad(lambda s: float(_bump(s)), -1, 1, epsabs=0, epsrel=1e-13)
        scale = 1.0 / (self.half_width * mass)
        n = int(math.ceil(2 * self.half_width / math.log(10) * self.nodes_per_decade)) + 1
        nodes = np.linspace(-self.half_width, self.half_width, n)
        vals = scale * _bump(nodes / self.half_width)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "log_nodes", nodes)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "normalization", float(trapezoid(vals, nodes)))

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = self.scale * _bump(np.log(t[pos]) / self.half_width)
        return out


def calderon_reproduce(op: SpectralOperator, prof: CalderonProfile, eps: float, v) -> np.ndarray:
    """Trapezoid quadrature in log a of the integral of phi(aS) v da/a over (eps, 1/eps).

    On a non-injective S the result tends to the projection onto the closure of ran(S).
    """
    if not 0 < eps < 1:
        raise ArgumentError("eps must lie in (0, 1)")
    v = op.coords(v)
    top = -math.log(eps)
    n = int(math.ceil(2 * top / math.log(10) * prof.nodes_per_decade)) + 1
    s = np.linspace(-top, top, n)
    weights = np.array([trapezoid(prof(np.exp(s) * lam), s) for lam in op.eigenvalues])
    return weights * v


def _complex_entry(x) -> complex:
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            raise SpecError("complex entries must be [re, im] pairs")
        return complex(float(x[0]), float(x[1]))
    return complex(float(x))


def operator_from_dict(doc: dict) -> SpectralOperator:
    keys = set(doc)
    if keys == {"eigenvalues", "basis"} or keys == {"eigenvalues"}:
        if doc.get("basis", "identity") != "identity":
            raise SpecError("only basis 'identity' is supported with an eigenvalue list")
        return SpectralOperator.from_eigenvalues([float(x) for x in doc["eigenvalues"]])
    if keys == {"matrix"}:
        rows = doc["matrix"]
        m = np.array([[_complex_entry(x) for x in row] for row in rows])
        return SpectralOperator.from_matrix(m)
    raise SpecError(f"unrecognised operator document keys {sorted(keys)}")


def operator_to_dict(op: SpectralOperator) -> dict:
    if op.has_identity_basis:
        return {"eigenvalues": op.eigenvalues.tolist(), "basis": "identity"}
    m = op.matrix()
    if np.max(np.abs(m.imag)) == 0:
        return {"matrix": m.real.tolist()}
    return {"matrix": [[[z.real, z.imag] for z in row] for row in m]}


def load_operator(path) -> SpectralOperator:
    return operator_from_dict(json.loads(Path(path).read_text()))


def save_operator(op: SpectralOperator, path) -> None:
    Path(path).write_text(json.dumps(operator_to_dict(op), indent=1))

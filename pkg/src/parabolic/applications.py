"""Concrete operator/form pairs in one space dimension.

* Dirichlet Laplacian on (0, L) in the sine basis, forms int A(t,x) u' v'.
* Integro-differential forms with kernel K(t,x,y)/|x-y|^(1+2 gamma) on the
  periodic grid, against (-Laplacian)^(gamma/2) on mean-zero functions.
* Weighted degenerate operators in L^2_w with a cell-centred finite-difference
  gradient, for A_2 weights w.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg

from .errors import ArgumentError, SpecError
from .parabolic_engine import FormFamily
from .spectral_core import SpectralOperator
from .time_analysis import TimeGrid

PRESETS = ("const", "abs_power", "exp", "rough_seeded")


def simpson_weights(m: int, h: float) -> np.ndarray:
    if m % 2:
        raise ArgumentError("Simpson's rule needs an even number of intervals")
    w = np.full(m + 1, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * h / 3


def _check_elliptic(values: np.ndarray, nu: float, M: float, what: str, scale=1.0) -> None:
    re = values.real / scale
    mag = np.abs(values) / scale
    if np.min(re) < nu * (1 - 1e-12) or np.max(mag) > M * (1 + 1e-12):
        raise SpecError(
            f"{what} violates ellipticity: min Re = {np.min(re):.4g} (nu = {nu}), max |A| = {np.max(mag):.4g} (M = {M})"
        )


# ---------------------------------------------------------------- Dirichlet


@dataclass(frozen=True)
class DirichletSpec:
    length: float
    n_modes: int
    coefficient: Callable  # A(t, x) -> complex array, vectorised over x
    M: float = 1.0
    nu: float = 1.0
    oversample: int = 4

    def __post_init__(self):
        if self.length <= 0 or self.n_modes < 1:
            raise SpecError("need length > 0 and n_modes >= 1")


def dirichlet_operator(spec: DirichletSpec, grid: TimeGrid) -> tuple[SpectralOperator, FormFamily]:
    """S with eigenvalues k pi / L in the sine basis; A_k[l, m] = (2/L) int A cos(l pi x/L) cos(m pi x/L)."""
    n, L = spec.n_modes, spec.length
    k = np.arange(1, n + 1)
    op = SpectralOperator.from_eigenvalues(k * math.pi / L)
    m = 2 * spec.oversample * n  # quadrature intervals; even, and above the product frequency 2n
    x = np.linspace(0.0, L, m + 1)
    w = simpson_weights(m, L / m)
    cos = np.cos(np.outer(k, x) * math.pi / L)
    mats = []
    for t in grid.times:
        a = np.asarray(spec.coefficient(t, x), dtype=complex) * np.ones_like(x)
        _check_elliptic(a, spec.nu, spec.M, "Dirichlet coefficient")
        mats.append((2.0 / L) * (cos * (w * a)) @ cos.T)
    return op, FormFamily(op, grid, np.array(mats), spec.M, spec.nu)


def dirichlet_form_matrix(op: SpectralOperator, ff: FormFamily, k: int) -> np.ndarray:
    """Generator S A_k S, i.e. the Gram matrix of int A e_l' e_m'."""
    return ff.generators()[k]


# ---------------------------------------------------------------- fractional kernels


@dataclass(frozen=True)
class FractionalKernelSpec:
    gamma: float
    n_grid: int
    kernel: Callable | np.ndarray  # K(t, x, y) vectorised over (x, y), or fixed (n, n) samples
    lambda_ell: float = 1.0

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ArgumentError("gamma must lie in (0, 1)")
        if self.n_grid < 3:
            raise SpecError("n_grid must be at least 3")
        if not 0 < self.lambda_ell <= 1:
            raise SpecError("lambda_ell must lie in (0, 1]")


PERIOD = 2 * math.pi


def fractional_modes(n_grid: int) -> np.ndarray:
    """Nonzero discrete frequencies ordered by |k| (positive first on ties)."""
    ks = np.fft.fftfreq(n_grid, 1.0 / n_grid).astype(int)
    ks = ks[ks != 0]
    return np.array(sorted(ks, key=lambda k: (abs(k), -k)))


def fractional_grid_form(spec: FractionalKernelSpec, t: float) -> np.ndarray:
    """Matrix Q with B(u, v) = v^H Q u on grid values, before removing the constants."""
    n = spec.n_grid
    h = PERIOD / n
    x = h * np.arange(n)
    xi, xj = np.meshgrid(x, x, indexing="ij")
    dist = np.abs(xi - xj)
    dist = np.minimum(dist, PERIOD - dist)
    raw = spec.kernel(t, xi, xj) if callable(spec.kernel) else spec.kernel
    kern = np.asarray(raw, dtype=complex) * np.ones_like(dist)
    off = ~np.eye(n, dtype=bool)
    re, mag = kern.real[off], np.abs(kern[off])
    lam = spec.lambda_ell
    if np.min(re) < lam * (1 - 1e-12) or np.max(mag) > (1 + 1e-12) / lam:
        raise SpecError("kernel violates lambda <= Re K <= |K| <= 1/lambda")
    c = np.zeros((n, n), dtype=complex)
    c[off] = kern[off] * h * h / dist[off] ** (1 + 2 * spec.gamma)
    sym = c + c.T
    return np.diag(sym.sum(axis=1)) - sym


def fractional_operator(spec: FractionalKernelSpec, grid: TimeGrid) -> tuple[SpectralOperator, FormFamily]:
    """S = (-Laplacian)^(gamma/2) on mean-zero grid functions; comparability constants are measured."""
    n = spec.n_grid
    modes = fractional_modes(n)
    lam = np.abs(modes).astype(float) ** spec.gamma
    op = SpectralOperator.from_eigenvalues(lam)
    x = PERIOD / n * np.arange(n)
    fourier = np.exp(1j * np.outer(x, modes)) / math.sqrt(PERIOD)
    inv = 1.0 / lam
    mats = []
    for t in grid.times:
        gen = fourier.conj().T @ fractional_grid_form(spec, t) @ fourier
        mats.append(inv[:, None] * gen * inv[None, :])
    mats = np.array(mats)
    m_meas = float(np.max(np.linalg.norm(mats, ord=2, axis=(1, 2))))
    herm = 0.5 * (mats + np.conj(np.swapaxes(mats, 1, 2)))
    nu_meas = float(np.min(np.linalg.eigvalsh(herm)))
    if nu_meas <= 0:
        raise SpecError(f"assembled kernel form is not coercive (measured nu = {nu_meas:.3e})")
    return op, FormFamily(op, grid, mats, m_meas, nu_meas)


def random_kernel(seed: int, lambda_ell: float) -> Callable:
    """Seeded smooth kernel with lambda <= Re K <= |K| <= 1/lambda."""
    rng = np.random.default_rng(seed)
    a, b, c, ph = rng.uniform(-3, 3, size=4)
    a2, b2, c2 = rng.uniform(-3, 3, size=3)
    lo, hi = lambda_ell, 1.0 / lambda_ell

    def kernel(t, x, y):
        s1 = 0.5 * (1 + np.sin(np.round(a) * x + np.round(b) * y + c * t + ph))
        s2 = np.sin(np.round(a2) * x + np.round(b2) * y + c2 * t)
        re = lo + (hi - lo) * s1
        im = np.sqrt(np.maximum(hi**2 - re**2, 0.0)) * s2
        return re + 1j * im

    return kernel


# ---------------------------------------------------------------- weights and degenerate operators


@dataclass(frozen=True)
class WeightSpec:
    """Weight on [lo, hi] discretised on ``n_cells`` equal cells.

    Presets give exact cell averages of w and 1/w; inline ``samples`` are
    taken as piecewise-constant cell values.
    """

    lo: float = -1.0
    hi: float = 1.0
    n_cells: int = 64
    preset: str = "const"
    params: dict = field(default_factory=dict)
    samples: tuple | None = None
    seed: int = 0

    def __post_init__(self):
        if self.hi <= self.lo or self.n_cells < 2:
            raise SpecError("weight needs hi > lo and at least two cells")
        if self.samples is None and self.preset not in PRESETS:
            raise SpecError(f"unknown weight preset {self.preset!r}")
        if self.samples is not None and len(self.samples) != self.n_cells:
            raise SpecError("inline weight needs one sample per cell")

    @property
    def dx(self) -> float:
        return (self.hi - self.lo) / self.n_cells

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n_cells + 1)

    @property
    def centers(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[1:] + e[:-1])

    def cell_averages(self) -> tuple[np.ndarray, np.ndarray]:
        """Exact cell averages of w and of 1/w."""
        e, dx = self.edges, self.dx
        if self.samples is not None:
            w = np.asarray(self.samples, dtype=float)
            if np.any(w <= 0) or not np.all(np.isfinite(w)):
                raise SpecError("weight samples must be positive and finite")
            return w, 1.0 / w
        if self.preset == "const":
            c = float(self.params.get("value", 1.0))
            if c <= 0:
                raise SpecError("constant weight must be positive")
            return np.full(self.n_cells, c), np.full(self.n_cells, 1.0 / c)
        if self.preset == "abs_power":
            x0 = float(self.params.get("center", 0.5 * (self.lo + self.hi)))
            p = float(self.params.get("power", 0.5))
            if not -1 < p < 1:
                raise SpecError("abs_power needs |power| < 1 to be an A_2 weight")

            def anti(q):
                y = e - x0
                return np.sign(y) * np.abs(y) ** (q + 1) / (q + 1)

            return np.diff(anti(p)) / dx, np.diff(anti(-p)) / dx
        if self.preset == "exp":
            c = float(self.params.get("rate", 1.0))
            if c == 0:
                return np.ones(self.n_cells), np.ones(self.n_cells)
            return np.diff(np.exp(c * e)) / (c * dx), -np.diff(np.exp(-c * e)) / (c * dx)
        if self.preset == "rough_seeded":
            rng = np.random.default_rng(self.seed)
            sigma = float(self.params.get("sigma", 0.3))
            walk = np.cumsum(rng.standard_normal(self.n_cells)) * sigma / math.sqrt(self.n_cells)
            w = np.exp(walk + sigma * rng.standard_normal(self.n_cells))
            return w, 1.0 / w
        raise SpecError(f"unknown weight preset {self.preset!r}")


def a2_constant(spec: WeightSpec, max_depth: int) -> float:
    """sup over dyadic subintervals (levels 0..max_depth, plus the grid cells) of avg(w) * avg(1/w).

    The weight is resolved at cell level, so levels finer than the cells add nothing.
    """
    if max_depth < 0:
        raise ArgumentError("max_depth must be nonnegative")
    w, winv = spec.cell_averages()
    e = spec.edges
    cum_w = np.concatenate([[0.0], np.cumsum(w * spec.dx)])
    cum_inv = np.concatenate([[0.0], np.cumsum(winv * spec.dx)])
    best = float(np.max(w * winv))  # grid cells
    for level in range(max_depth + 1):
        parts = 2**level
        if parts >= spec.n_cells:
            break  # sub-cell intervals repeat the cell products already counted
        if spec.n_cells % parts == 0:
            # dyadic points fall on cell edges: block means avoid prefix cancellation
            aw = w.reshape(parts, -1).mean(axis=1)
            ainv = winv.reshape(parts, -1).mean(axis=1)
        else:
            pts = np.linspace(spec.lo, spec.hi, parts + 1)
            length = np.diff(pts)
            aw = np.diff(np.interp(pts, e, cum_w)) / length
            ainv = np.diff(np.interp(pts, e, cum_inv)) / length
        best = max(best, float(np.max(aw * ainv)))
    return best


def degenerate_operator(
    spec: WeightSpec, grid: TimeGrid, coeff: Callable | None = None, nu: float = 1.0, M: float = 1.0
) -> tuple[SpectralOperator, FormFamily]:
    """H = L^2_w on cells, T = difference quotient across interior faces, S = |T| in the w inner product.

    ``coeff(t, x_faces, w_faces)`` gives A on the faces and must satisfy
    nu w <= Re A and |A| <= M w; by default A = w, for which B_t(u, v) = <Su, Sv>.
    The constants span nul(S).
    """
    w_cell, _ = spec.cell_averages()
    if np.any(w_cell <= 0):
        raise SpecError("nonpositive weight sample")
    n, dx = spec.n_cells, spec.dx
    w_face = 0.5 * (w_cell[1:] + w_cell[:-1])
    x_face = spec.edges[1:-1]
    diff = (np.eye(n, k=1)[:-1] - np.eye(n)[:-1]) / dx  # (n-1, n)
    mass = np.diag(w_cell * dx)
    stiff = diff.T @ (w_face[:, None] * dx * diff)
    mu, phi = linalg.eigh(stiff, mass)
    # exact constant null vector keeps the null coordinate decoupled bit-for-bit
    const = np.ones(n) / math.sqrt(np.sum(w_cell * dx))
    phi[:, 0] = const
    for j in range(1, n):
        phi[:, j] -= const * (const @ mass @ phi[:, j])
        phi[:, j] /= math.sqrt(phi[:, j] @ mass @ phi[:, j])
    mu[0] = 0.0
    mu = np.where(mu < 1e-12 * mu[-1], 0.0, mu)
    sqrt_mass = np.sqrt(w_cell * dx)
    op = SpectralOperator(np.sqrt(mu), sqrt_mass[:, None] * phi)
    grad_phi = diff @ phi  # (n-1, n)
    s = op.eigenvalues
    s_pinv = np.where(s > 0, 1.0 / np.where(s > 0, s, 1.0), 0.0)
    mats = []
    for t in grid.times:
        a = w_face if coeff is None else np.asarray(coeff(t, x_face, w_face), dtype=complex) * np.ones_like(w_face)
        _check_elliptic(a, nu, M, "degenerate coefficient", scale=w_face)
        gen = grad_phi.T @ (a[:, None] * dx * grad_phi)
        a_mat = s_pinv[:, None] * gen * s_pinv[None, :]
        a_mat[s == 0, s == 0] = 1.0
        mats.append(a_mat)
    return op, FormFamily(op, grid, np.array(mats), M, nu)


def weighted_gram(spec: WeightSpec, op: SpectralOperator) -> np.ndarray:
    """Gram matrix of the eigenfunctions in the w inner product (identity up to rounding)."""
    w_cell, _ = spec.cell_averages()
    phi = op.basis / np.sqrt(w_cell * spec.dx)[:, None]
    return phi.conj().T @ ((w_cell * spec.dx)[:, None] * phi)

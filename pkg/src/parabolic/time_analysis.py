"""Uniform time grids, trajectories, time-Fourier multipliers and time norms.

Window grids (``full_line_window``) stand in for the real line: the first
``n_steps`` samples are one period of a periodic signal and the last sample
is its periodic image. Time norms on window grids therefore use the periodic
rectangle rule, which is the trapezoid rule for periodic data; bounded and
half-line grids use the composite trapezoid rule.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.special import gamma as gamma_fn

from .errors import ArgumentError, ContractError, SpecError
from .spectral_core import SpectralOperator

EDGE_DECAY = 1e-8  # window data must fall below this fraction of its peak at both edges


class GridKind(str, Enum):
    WINDOW = "full_line_window"
    HALF_LINE = "half_line"
    BOUNDED = "bounded"


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    t1: float
    n_steps: int
    kind: GridKind = GridKind.BOUNDED

    def __post_init__(self):
        object.__setattr__(self, "kind", GridKind(self.kind))
        if not (math.isfinite(self.t0) and math.isfinite(self.t1)) or self.t1 <= self.t0:
            raise SpecError(f"grid needs t1 > t0, got [{self.t0}, {self.t1}]")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise SpecError("n_steps must be a positive integer")
        object.__setattr__(self, "n_steps", int(self.n_steps))
        if not self.dt > 0:
            raise SpecError("degenerate time step")

    @property
    def dt(self) -> float:
        return (self.t1 - self.t0) / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_steps + 1)

    @property
    def is_window(self) -> bool:
        return self.kind is GridKind.WINDOW

    def weights(self) -> np.ndarray:
        """Quadrature weights for time integrals over the whole grid."""
        w = np.full(self.n_steps + 1, self.dt)
        if self.is_window:
            w[-1] = 0.0
        else:
            w[0] = w[-1] = 0.5 * self.dt
        return w

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.t0, self.t1, self.n_steps * factor, self.kind)

    def reversed_times(self) -> np.ndarray:
        return self.times[::-1]

    def index_at_or_after(self, s: float) -> int:
        """First grid index whose time is >= s (with a rounding allowance)."""
        if s < self.t0 - 1e-12 * self.dt or s > self.t1 + 1e-12 * self.dt:
            raise ArgumentError(f"time {s} lies outside [{self.t0}, {self.t1}]")
        k = math.ceil((s - self.t0) / self.dt - 1e-9)
        return min(max(k, 0), self.n_steps)

    def to_dict(self) -> dict:
        return {"t0": self.t0, "t1": self.t1, "n_steps": self.n_steps, "kind": self.kind.value}


def require_window(grid: TimeGrid, what: str) -> None:
    if not grid.is_window:
        raise ContractError(f"{what} needs a full_line_window grid, got {grid.kind.value}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    grid: TimeGrid
    op: SpectralOperator
    values: np.ndarray
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex)
        if vals.shape != (self.grid.n_steps + 1, self.op.dim):
            raise SpecError(
                f"trajectory shape {vals.shape} != ({self.grid.n_steps + 1}, {self.op.dim})"
            )
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, op: SpectralOperator, grid: TimeGrid) -> "Trajectory":
        return cls(grid, op, np.zeros((grid.n_steps + 1, op.dim)))

    @classmethod
    def from_function(cls, op: SpectralOperator, grid: TimeGrid, fn: Callable) -> "Trajectory":
        return cls(grid, op, np.array([fn(t) for t in grid.times]))

    @classmethod
    def separable(cls, op: SpectralOperator, grid: TimeGrid, profile: Callable, a) -> "Trajectory":
        """profile(t) * a, with profile vectorised over the grid times."""
        p = np.asarray(profile(grid.times), dtype=complex)
        return cls(grid, op, p[:, None] * op.coords(a)[None, :])

    def with_values(self, values, flags=None) -> "Trajectory":
        return Trajectory(self.grid, self.op, values, self.flags if flags is None else flags)

    def __add__(self, other: "Trajectory") -> "Trajectory":
        same_grid(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "Trajectory") -> "Trajectory":
        same_grid(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, c: complex) -> "Trajectory":
        return self.with_values(self.values * c)

    __rmul__ = __mul__

    def spatial(self, alpha: float) -> "Trajectory":
        """Apply S**alpha at every time."""
        return self.with_values(self.values * self.op.power_factors(alpha)[None, :])

    def pointwise_norms(self, alpha: float = 0.0) -> np.ndarray:
        return np.linalg.norm(self.values * self.op.power_factors(alpha)[None, :], axis=1)


def same_grid(*trs: Trajectory) -> None:
    first = trs[0]
    for tr in trs[1:]:
        if tr.grid != first.grid:
            raise ContractError("trajectories live on different grids")
        if tr.op.dim != first.op.dim:
            raise ContractError("trajectories live on operators of different dimension")


def periodic_samples(tr: Trajectory) -> np.ndarray:
    return tr.values[: tr.grid.n_steps]


def _close_period(values: np.ndarray) -> np.ndarray:
    return np.vstack([values, values[:1]])


def edge_decay_ratio(tr: Trajectory) -> float:
    norms = tr.pointwise_norms()
    peak = norms.max()
    if peak == 0:
        return 0.0
    return float(max(norms[0], norms[-1]) / peak)


def edge_flags(*trs: Trajectory) -> tuple[str, ...]:
    if any(edge_decay_ratio(tr) > EDGE_DECAY for tr in trs):
        return ("edge_decay",)
    return ()


# ---------------------------------------------------------------- frequency side


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    frequencies: np.ndarray
    dtau: float

    @classmethod
    def for_grid(cls, grid: TimeGrid) -> "FrequencyGrid":
        n = grid.n_steps
        return cls(2 * np.pi * np.fft.fftfreq(n, grid.dt), 2 * np.pi / (n * grid.dt))


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Samples of the continuous-normalised time Fourier transform of a trajectory."""

    grid: TimeGrid
    op: SpectralOperator
    freq: FrequencyGrid
    values: np.ndarray

    def l2_norm(self, alpha: float = 0.0) -> float:
        v = self.values * self.op.power_factors(alpha)[None, :]
        return float(np.sqrt(self.freq.dtau * np.sum(np.abs(v) ** 2)))


def time_fourier(tr: Trajectory) -> Spectrum:
    """Transform of int exp(-i tau t) u(t) dt over one period of the window."""
    require_window(tr.grid, "time_fourier")
    freq = FrequencyGrid.for_grid(tr.grid)
    phase = np.exp(-1j * freq.frequencies * tr.grid.t0)
    vals = tr.grid.dt * phase[:, None] * np.fft.fft(periodic_samples(tr), axis=0)
    return Spectrum(tr.grid, tr.op, freq, vals)


def inverse_time_fourier(sp: Spectrum) -> Trajectory:
    phase = np.exp(1j * sp.freq.frequencies * sp.grid.t0)
    vals = np.fft.ifft(phase[:, None] * sp.values, axis=0) / sp.grid.dt
    return Trajectory(sp.grid, sp.op, _close_period(vals))


def apply_time_multiplier(tr: Trajectory, symbol: np.ndarray) -> Trajectory:
    """Multiply the transform by symbol(tau_k) (shape (N,) or (N, dim))."""
    require_window(tr.grid, "time multiplier")
    sym = np.asarray(symbol)
    if sym.ndim == 1:
        sym = sym[:, None]
    vals = np.fft.ifft(sym * np.fft.fft(periodic_samples(tr), axis=0), axis=0)
    return tr.with_values(_close_period(vals))


def derivative_symbol(grid: TimeGrid, beta: float) -> np.ndarray:
    """|tau|^beta with the DC mode annihilated for beta > 0."""
    tau = FrequencyGrid.for_grid(grid).frequencies
    if beta == 0:
        return np.ones_like(tau)
    out = np.abs(tau) ** beta
    out[tau == 0] = 0.0
    return out


def fractional_time_derivative(tr: Trajectory, beta: float) -> Trajectory:
    if not 0 <= beta <= 1:
        raise ArgumentError(f"beta must lie in [0, 1], got {beta}")
    require_window(tr.grid, "fractional_time_derivative")
    if beta == 0:
        return tr.with_values(_close_period(periodic_samples(tr)))
    return apply_time_multiplier(tr, derivative_symbol(tr.grid, beta))


def hilbert_symbol(grid: TimeGrid) -> np.ndarray:
    return 1j * np.sign(FrequencyGrid.for_grid(grid).frequencies)


def hilbert_transform(tr: Trajectory) -> Trajectory:
    require_window(tr.grid, "hilbert_transform")
    return apply_time_multiplier(tr, hilbert_symbol(tr.grid))


# ---------------------------------------------------------------- time norms


def l2_inner(u: Trajectory, v: Trajectory) -> complex:
    """Time integral of <u(t), v(t)> (linear in u)."""
    same_grid(u, v)
    w = u.grid.weights()
    return complex(np.sum(w * np.sum(u.values * v.values.conj(), axis=1)))


def l2_norm(tr: Trajectory, alpha: float = 0.0) -> float:
    """Norm in L^2(I; D_{S,alpha})."""
    return float(np.sqrt(np.sum(tr.grid.weights() * tr.pointwise_norms(alpha) ** 2)))


def l1_norm(tr: Trajectory, alpha: float = 0.0) -> float:
    return float(np.sum(tr.grid.weights() * tr.pointwise_norms(alpha)))


def sup_norm(tr: Trajectory, alpha: float = 0.0) -> float:
    return float(tr.pointwise_norms(alpha).max())


def mixed_norm(tr: Trajectory, r: float, alpha: float) -> float:
    """Norm in L^r(I; D_{S,alpha}) on the exponent line r * alpha = 2."""
    if r == math.inf:
        if alpha != 0:
            raise ArgumentError("r = inf requires alpha = 0")
        return sup_norm(tr)
    if r < 2 or not math.isclose(r * alpha, 2.0, rel_tol=1e-12):
        raise ArgumentError(f"mixed_norm needs r * alpha = 2, got r={r}, alpha={alpha}")
    w = tr.grid.weights()
    return float(np.sum(w * tr.pointwise_norms(alpha) ** r) ** (1.0 / r))


def _freq_energy(tr: Trajectory) -> tuple[np.ndarray, np.ndarray, float]:
    sp = time_fourier(tr)
    return sp.freq.frequencies, np.abs(sp.values) ** 2, sp.freq.dtau / (2 * np.pi)


def v_alpha_norm(tr: Trajectory, alpha: float) -> float:
    """(||u||^2 in L^2(D_{S,1}) + ||D_t^{(1-alpha)/2} u||^2 in L^2(D_{S,alpha}))^(1/2), frequency side."""
    if not -1 <= alpha <= 1:
        raise ArgumentError("alpha must lie in [-1, 1]")
    lam = tr.op.eigenvalues
    pa = tr.op.power_factors(alpha) ** 2
    tau, energy, w = _freq_energy(tr)
    time_sym = derivative_symbol(tr.grid, 1 - alpha)
    total = np.sum(energy * (lam[None, :] ** 2 + time_sym[:, None] * pa[None, :]))
    return float(np.sqrt(w * total))


def v_alpha_equivalent_norm(tr: Trajectory, alpha: float) -> float:
    """||S^alpha (S + |tau|^(1/2))^(1-alpha) u_hat|| / sqrt(2 pi), the comparable frequency norm."""
    lam = tr.op.eigenvalues
    pa = tr.op.power_factors(alpha) ** 2
    tau, energy, w = _freq_energy(tr)
    mix = (lam[None, :] + np.sqrt(np.abs(tau))[:, None]) ** (2 * (1 - alpha))
    return float(np.sqrt(w * np.sum(energy * pa[None, :] * mix)))


def v0_dual_norm(tr: Trajectory) -> float:
    """Exact dual norm of a source in V_0* for the pairing in L^2(H) (frequency weights 1/(lambda^2+|tau|))."""
    lam = tr.op.eigenvalues
    tau, energy, w = _freq_energy(tr)
    weight = lam[None, :] ** 2 + np.abs(tau)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(energy > 0, energy / weight, 0.0)
    return float(np.sqrt(w * np.sum(terms)))


def w_alpha_norm(tr: Trajectory, alpha: float, dc_tol: float = 1e-10) -> float:
    """||D_t^{-(1+alpha)/2} f|| in L^2(D_{S,alpha}); infinite when f carries a DC component."""
    pa = tr.op.power_factors(alpha) ** 2
    tau, energy, w = _freq_energy(tr)
    dc = energy[tau == 0].sum()
    if dc > dc_tol ** 2 * max(energy.sum(), 1e-300):
        return math.inf
    inv = np.zeros_like(tau)
    nz = tau != 0
    inv[nz] = np.abs(tau[nz]) ** (-(1 + alpha))
    return float(np.sqrt(w * np.sum(energy * inv[:, None] * pa[None, :])))


def hls_constant(r: float) -> float:
    """Sharp one-dimensional Sobolev constant for ||f||_{L^r} <= C ||D_t^s f||_{L^2}, s = 1/2 - 1/r.

    The scalar constant also serves Hilbert-space valued functions, because for
    s < 1/2 the Gagliardo seminorm of |f(t)| is dominated by that of f.
    """
    if not 2 <= r < math.inf:
        raise ArgumentError("r must lie in [2, inf)")
    s = 0.5 - 1.0 / r
    return float((2 * np.pi) ** (-s) * np.sqrt(gamma_fn(0.5 - s) / gamma_fn(0.5 + s)))


def hls_check(tr: Trajectory, r: float) -> tuple[float, float]:
    """(||u||_{L^r(D_{S,2/r})}, ||D_t^{(1-2/r)/2} u||_{L^2(D_{S,2/r})}); expect lhs <= hls_constant(r) * rhs."""
    if not 2 <= r < math.inf:
        raise ArgumentError("r must lie in [2, inf)")
    require_window(tr.grid, "hls_check")
    alpha = 2.0 / r
    lhs = mixed_norm(tr, r, alpha)
    rhs = l2_norm(fractional_time_derivative(tr, (1 - alpha) / 2), alpha)
    return lhs, rhs


# ---------------------------------------------------------------- integral identities


def _check_index(tr: Trajectory, *idx: int) -> None:
    for i in idx:
        if not 0 <= i <= tr.grid.n_steps:
            raise ArgumentError(f"index {i} outside grid 0..{tr.grid.n_steps}")


def _segment_trapezoid(values: np.ndarray, dt: float, lo: int, hi: int) -> complex:
    seg = values[lo : hi + 1]
    if seg.size < 2:
        return 0.0
    return complex(dt * (seg.sum() - 0.5 * (seg[0] + seg[-1])))


def source_pairing(u: Trajectory, f: Trajectory | None, g: Trajectory | None, beta: float) -> np.ndarray:
    """Pointwise <f, S u> + <g, S^beta u>."""
    out = np.zeros(u.grid.n_steps + 1, dtype=complex)
    if f is not None:
        same_grid(u, f)
        out += np.sum(f.values * u.spatial(1.0).values.conj(), axis=1)
    if g is not None:
        same_grid(u, g)
        out += np.sum(g.values * u.spatial(beta).values.conj(), axis=1)
    return out


def integral_identity_residual(
    u: Trajectory, f: Trajectory | None, g: Trajectory | None, beta: float, sigma_idx: int, tau_idx: int
) -> float:
    """| ||u(tau)||^2 - ||u(sigma)||^2 - 2 Re int (<f, Su> + <g, S^beta u>) | for du/dt = S f + S^beta g."""
    _check_index(u, sigma_idx, tau_idx)
    lo, hi = sorted((sigma_idx, tau_idx))
    sign = 1.0 if tau_idx >= sigma_idx else -1.0
    integral = sign * 2 * _segment_trapezoid(source_pairing(u, f, g, beta).real, u.grid.dt, lo, hi).real
    norms = u.pointwise_norms() ** 2
    return float(abs(norms[tau_idx] - norms[sigma_idx] - integral))


def polarized_identity_residual(
    u: Trajectory,
    f: Trajectory | None,
    g: Trajectory | None,
    u2: Trajectory,
    f2: Trajectory | None,
    g2: Trajectory | None,
    beta: float,
    sigma_idx: int,
    tau_idx: int,
) -> float:
    """Residual of <u, u2>(tau) - <u, u2>(sigma) = int <f,S u2> + <g,S^b u2> + <S u,f2> + <S^b u,g2>."""
    same_grid(u, u2)
    _check_index(u, sigma_idx, tau_idx)
    lo, hi = sorted((sigma_idx, tau_idx))
    sign = 1.0 if tau_idx >= sigma_idx else -1.0
    integrand = source_pairing(u2, f, g, beta) + source_pairing(u, f2, g2, beta).conj()
    integral = sign * _segment_trapezoid(integrand, u.grid.dt, lo, hi)
    inner = np.sum(u.values * u2.values.conj(), axis=1)
    return float(abs(inner[tau_idx] - inner[sigma_idx] - integral))


def l1_sup_bound(u: Trajectory, f: Trajectory | None, g: Trajectory | None) -> tuple[float, float]:
    """(sup ||u||, sqrt(2 ||u||_{L^2(D_{S,1})} ||f||_{L^2(H)}) + (1+sqrt2) ||g||_{L^1(H)}).

    For du/dt = S f + g with u vanishing at the start of the grid; ``f`` is the
    density whose image S f is the D_{S,-1} part, so its L^2(D_{S,-1}) norm is
    the plain L^2(H) norm of ``f``.
    """
    fn = l2_norm(f) if f is not None else 0.0
    gn = l1_norm(g) if g is not None else 0.0
    rhs = math.sqrt(2 * l2_norm(u, 1.0) * fn) + (1 + math.sqrt(2)) * gn
    return sup_norm(u), rhs


# ---------------------------------------------------------------- CSV


def trajectory_to_csv(tr: Trajectory, path) -> None:
    header = ["t"] + [f"{part}{i}" for i in range(tr.op.dim) for part in ("re", "im")]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t, row in zip(tr.grid.times, tr.values):
            inter = np.empty(2 * row.size)
            inter[0::2], inter[1::2] = row.real, row.imag
            w.writerow([f"{t:.17g}"] + [f"{x:.17g}" for x in inter])


def trajectory_from_csv(path, op: SpectralOperator, grid: TimeGrid) -> Trajectory:
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))[1:]
    data = np.array([[float(x) for x in r] for r in rows])
    if not np.allclose(data[:, 0], grid.times, rtol=0, atol=1e-12 * max(1.0, abs(grid.t1))):
        raise ContractError("CSV times do not match the grid")
    return Trajectory(grid, op, data[:, 1::2] + 1j * data[:, 2::2])

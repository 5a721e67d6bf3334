"""Solvers and a-priori bounds for the abstract heat equation du/dt + S^2 u = source."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import time_analysis as ta
from .errors import ArgumentError, ContractError, DomainError, NumericError
from .report import Report, inequality
from .spectral_core import SpectralOperator
from .time_analysis import TimeGrid, Trajectory

C_ALPHA_CLAMP = (-1.0, -0.01)  # sup-norm constant diverges as alpha -> 0-


@dataclass(frozen=True, eq=False)
class SourceSpec:
    """Right-hand side S f2 + S^beta g + h1 + sum of Dirac masses a at times s.

    Every trajectory lives on ``grid`` and ``op``; ``diracs`` is a tuple of
    (time, vector) pairs in eigencoordinates.
    """

    op: SpectralOperator
    grid: TimeGrid
    f2: Trajectory | None = None
    g: Trajectory | None = None
    beta: float = 0.0
    h1: Trajectory | None = None
    diracs: tuple = ()

    def __post_init__(self):
        parts = [p for p in (self.f2, self.g, self.h1) if p is not None]
        if not parts and not self.diracs:
            raise ContractError("a source needs at least one part")
        for p in parts:
            if p.grid != self.grid or p.op is not self.op and p.op.dim != self.op.dim:
                raise ContractError("source parts must share the grid and operator")
        if self.g is not None and not 0 <= self.beta < 1:
            raise ArgumentError("beta must lie in [0, 1)")
        diracs = tuple((float(s), self.op.coords(a).copy()) for s, a in self.diracs)
        for s, _ in diracs:
            self.grid.index_at_or_after(s)
        object.__setattr__(self, "diracs", diracs)

    @classmethod
    def zero(cls, op: SpectralOperator, grid: TimeGrid) -> "SourceSpec":
        return cls(op, grid, h1=Trajectory.zeros(op, grid))

    @property
    def rho(self) -> float:
        return math.inf if self.beta == 0 else 2.0 / self.beta

    def density(self) -> np.ndarray:
        """Strong-form samples S f2 + S^beta g + h1 at every grid time."""
        out = np.zeros((self.grid.n_steps + 1, self.op.dim), dtype=complex)
        if self.f2 is not None:
            out += self.f2.spatial(1.0).values
        if self.g is not None:
            out += self.g.spatial(self.beta).values
        if self.h1 is not None:
            out += self.h1.values
        return out

    def dirac_kicks(self) -> np.ndarray:
        """Dirac masses gathered onto the first grid index at or after their time."""
        kicks = np.zeros((self.grid.n_steps + 1, self.op.dim), dtype=complex)
        for s, a in self.diracs:
            kicks[self.grid.index_at_or_after(s)] += a
        return kicks

    def dirac_indices(self) -> set[int]:
        return {self.grid.index_at_or_after(s) for s, _ in self.diracs}

    def is_zero(self) -> bool:
        return not np.any(self.density()) and not any(np.any(a) for _, a in self.diracs)

    def scaled(self, c: float) -> "SourceSpec":
        sc = lambda tr: None if tr is None else tr * c
        return SourceSpec(
            self.op, self.grid, sc(self.f2), sc(self.g), self.beta, sc(self.h1),
            tuple((s, c * a) for s, a in self.diracs),
        )


def phi1(z: np.ndarray) -> np.ndarray:
    """(1 - exp(-z)) / z with phi1(0) = 1."""
    z = np.asarray(z, dtype=float)
    out = np.ones_like(z)
    nz = z != 0
    out[nz] = -np.expm1(-z[nz]) / z[nz]
    return out


def phi2(z: np.ndarray) -> np.ndarray:
    """Integral of theta * exp(-z (1 - theta)) over [0, 1]; weight of a linear source ramp."""
    z = np.asarray(z, dtype=float)
    small = z < 1e-2
    out = np.empty_like(z)
    zs = z[small]
    out[small] = 0.5 - zs / 6 + zs**2 / 24 - zs**3 / 120 + zs**4 / 720
    zl = z[~small]
    out[~small] = (zl + np.expm1(-zl)) / zl**2
    return out


def heat_step_factors(op: SpectralOperator, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-mode (exp(-lambda^2 dt), phi1(lambda^2 dt))."""
    z = op.eigenvalues**2 * dt
    return np.exp(-z), phi1(z)


def duhamel_solve(op: SpectralOperator, src: SourceSpec, grid: TimeGrid, sampling: str = "left") -> Trajectory:
    """Exact exponential integrator for du/dt + S^2 u = src with u = 0 before the grid starts.

    ``sampling="left"`` freezes the source at the left end of each step.
    ``sampling="linear"`` integrates the piecewise-linear interpolant exactly,
    which is second order for smooth sources.
    """
    if src.grid != grid:
        raise ContractError("source and solver grids differ")
    if sampling not in ("left", "linear"):
        raise ArgumentError(f"unknown sampling {sampling!r}")
    dt = grid.dt
    z = op.eigenvalues**2 * dt
    decay, w1 = np.exp(-z), phi1(z)
    w2 = phi2(z)
    dens = src.density()
    kicks = src.dirac_kicks()
    u = np.zeros_like(dens)
    u[0] = kicks[0]
    for k in range(grid.n_steps):
        inc = w1 * dens[k]
        if sampling == "linear":
            inc = inc + w2 * (dens[k + 1] - dens[k])
        u[k + 1] = decay * u[k] + dt * inc + kicks[k + 1]
    return Trajectory(grid, op, u)


def fourier_heat_solve(op: SpectralOperator, src: SourceSpec, grid: TimeGrid, pad: float | None = None) -> Trajectory:
    """Per-mode resolvent (i tau + lambda^2)^-1 on the periodic window, zero-padded.

    ``pad`` is the padding length in time units appended after the window;
    by default it is long enough for the slowest mode to decay by e^-30
    (at least three window lengths, at most 64 windows). Dirac masses enter
    as discrete deltas a / dt at their grid index.
    """
    ta.require_window(grid, "fourier_heat_solve")
    if not op.injective:
        raise DomainError("S not injective: the zero frequency has no resolvent")
    if src.grid != grid:
        raise ContractError("source and solver grids differ")
    n, dt = grid.n_steps, grid.dt
    length = grid.t1 - grid.t0
    if pad is None:
        pad = min(max(3 * length, 30.0 / float(op.eigenvalues[0]) ** 2), 64 * length)
    if pad < 0:
        raise ArgumentError("padding must be nonnegative")
    extra = int(math.ceil(pad / dt))
    dens = (src.density() + src.dirac_kicks() / dt)[:n]
    padded = np.vstack([dens, np.zeros((extra, op.dim), dtype=complex)])
    tau = 2 * np.pi * np.fft.fftfreq(n + extra, d=dt)
    resolvent = 1.0 / (1j * tau[:, None] + op.eigenvalues[None, :] ** 2)
    vals = np.fft.ifft(resolvent * np.fft.fft(padded, axis=0), axis=0)
    vals = vals[: n + 1] if extra else np.vstack([vals, vals[:1]])
    rhs = Trajectory(grid, op, src.density() + src.dirac_kicks() / dt)
    u = Trajectory(grid, op, vals)
    return u.with_values(u.values, flags=ta.edge_flags(rhs, u))


def heat_constants(alpha: float) -> tuple[float, float]:
    """(C(alpha), C'(alpha)) of the Duhamel a-priori bounds.

    C(alpha)^2 = (1/2pi) int_0^inf t^(-2 alpha) / (1 + t^4) dt/t for alpha in [-1, 0);
    it is infinite for alpha >= 0. C'(alpha) = sup_t t^(1-alpha) (1+t^4)^(-1/2).
    """
    if not -1 <= alpha <= 1:
        raise ArgumentError(f"alpha must lie in [-1, 1], got {alpha}")
    if alpha < 0:
        # t^(s-1) / (1 + t^4) with s = -2 alpha; the 1/s singular part on (0, 1) is exact
        s = -2 * alpha
        rest = lambda t: t ** (s + 3) / (1 + t**4)
        tail = lambda t: t ** (s - 1) / (1 + t**4)
        lo, e1 = integrate.quad(rest, 0, 1, epsabs=0, epsrel=1e-12, limit=200)
        hi, e2 = integrate.quad(tail, 1, np.inf, epsabs=0, epsrel=1e-12, limit=200)
        total = 1.0 / s - lo + hi
        if e1 + e2 > 1e-8 * total:
            raise NumericError(f"quadrature for C({alpha}) missed its tolerance")
        c = math.sqrt(total / (2 * math.pi))
    else:
        c = math.inf
    if abs(alpha) == 1:
        cp = 1.0
    else:
        t4 = (1 - alpha) / (1 + alpha)
        cp = t4 ** ((1 - alpha) / 4) / math.sqrt(1 + t4)
    return c, cp


def quadratic_equality(op: SpectralOperator, a) -> tuple[float, float]:
    """(quadrature of int_0^inf ||S exp(-s S^2) a||^2 ds, analytic 1/2 ||a||^2 on ran S)."""
    a = op.coords(a)
    # in the mode's own time x = lam^2 s the integrand is exp(-2x), whatever lam is
    val, _ = integrate.quad(lambda x: math.exp(-2 * x), 0, np.inf, epsabs=0, epsrel=1e-12)
    total = 0.0
    for lam, ai in zip(op.eigenvalues, a):
        if lam == 0 or ai == 0:
            continue
        total += val * abs(ai) ** 2
    analytic = 0.5 * float(np.sum(np.abs(a[op.eigenvalues > 0]) ** 2))
    return total, analytic


def apriori_report(op: SpectralOperator, src: SourceSpec, u: Trajectory, slack_per_dt: float = 1.0) -> Report:
    """Every Duhamel a-priori bound that applies to ``src``.

    Each source class contributes its own bound; mixed sources are checked
    with the sum of the per-class bounds. The tolerance is 1e-8 plus an O(dt)
    discretisation allowance.
    """
    grid = u.grid
    dt = grid.dt
    lam_max = float(op.eigenvalues[-1])
    tol = lambda rhs: 1e-8 + slack_per_dt * dt * (1 + lam_max**2) * rhs
    sup_u = ta.sup_norm(u)
    energy_u = ta.l2_norm(u, 1.0)
    rep = Report()

    mass = (ta.l1_norm(src.h1) if src.h1 is not None else 0.0) + sum(float(np.linalg.norm(a)) for _, a in src.diracs)
    f2n = ta.l2_norm(src.f2) if src.f2 is not None else 0.0
    has_l1 = src.h1 is not None or bool(src.diracs)
    classes = {"l1": has_l1, "dminus1": src.f2 is not None, "w": src.g is not None}

    sup_terms, energy_terms = [], []
    if has_l1:
        sup_terms.append(mass)
        energy_terms.append(mass / math.sqrt(2))
    if src.f2 is not None:
        sup_terms.append(f2n / math.sqrt(2))
        energy_terms.append(f2n)
    if src.g is not None:
        if not grid.is_window:
            rep.notes.append("W-class bounds need a window grid; g part bounded only through the total")
            gs = src.g.spatial(src.beta)
            sup_terms.append(ta.l1_norm(gs))
            energy_terms.append(ta.l1_norm(gs) / math.sqrt(2))
        else:
            alpha = -src.beta
            clamped = min(max(alpha, C_ALPHA_CLAMP[0]), C_ALPHA_CLAMP[1])
            if clamped != alpha:
                rep.notes.append(f"alpha={alpha} clamped to {clamped} for the sup-norm constant")
            fw = src.g.spatial(src.beta)
            c_sup, _ = heat_constants(clamped)
            _, c_en = heat_constants(alpha)
            w_sup = ta.w_alpha_norm(fw, clamped)
            w_en = ta.w_alpha_norm(fw, alpha)
            sup_terms.append(c_sup * w_sup)
            energy_terms.append(c_en * w_en)
            if sum(classes.values()) == 1 and math.isfinite(w_en):
                lhs = ta.l2_norm(ta.fractional_time_derivative(u, (1 - alpha) / 2), alpha)
                rep.add(inequality("w_to_v_alpha", lhs, w_en, tol(w_en), "heat a-priori bound: W_alpha to V_alpha"))

    single = sum(classes.values()) == 1
    if single:
        name = next(k for k, v in classes.items() if v)
        rep.add(
            inequality(f"sup_{name}", sup_u, sup_terms[0], tol(sup_terms[0]), f"heat a-priori sup bound ({name} source)"),
            inequality(f"energy_{name}", energy_u, energy_terms[0], tol(energy_terms[0]), f"heat a-priori energy bound ({name} source)"),
        )
    else:
        s, e = sum(sup_terms), sum(energy_terms)
        rep.add(
            inequality("sup_total", sup_u, s, tol(s), "heat a-priori sup bound (sum over source classes)"),
            inequality("energy_total", energy_u, e, tol(e), "heat a-priori energy bound (sum over source classes)"),
        )

    if not src.diracs:
        # du/dt = S (f2 - S u) + (S^beta g + h1)
        f_part = Trajectory(grid, op, (src.f2.values if src.f2 is not None else 0) - u.spatial(1.0).values)
        g_vals = np.zeros_like(u.values)
        if src.g is not None:
            g_vals = g_vals + src.g.spatial(src.beta).values
        if src.h1 is not None:
            g_vals = g_vals + src.h1.values
        lhs, rhs = ta.l1_sup_bound(u, f_part, Trajectory(grid, op, g_vals))
        rep.add(inequality("sup_energy_l1", lhs, rhs, tol(rhs), "sup bound from the integral identity with an L1 part"))
    return rep

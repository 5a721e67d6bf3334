"""Time-dependent coercive forms B_k(u, v) = <A_k S~u, S~v> + <C_k u, v> and their parabolic solvers.

``S~`` is the shifted operator (lambda^2 + S^2)^(1/2) (just S when lambda = 0)
and ``C_k`` an optional bounded zeroth-order part. The generator of step k is
``L_k = S~ A_k S~ + C_k`` in eigencoordinates, so du/dt + L u = src.

Time stepping uses coefficients frozen at the left end of each step. When
kappa > 0 the solver integrates v = exp(-(kappa+1) t) u, whose generator is
strictly accretive, and maps back exactly; a scalar shift ``omega`` is applied
the same way, as an exact factor exp(-omega dt) per step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from . import time_analysis as ta
from .errors import ArgumentError, ContractError, DomainError, NumericError, SpecError
from .heat_engine import SourceSpec
from .report import Report, inequality, residual
from .spectral_core import SpectralOperator, shift
from .time_analysis import GridKind, TimeGrid, Trajectory

SCHEMES = ("implicit_euler", "crank_nicolson")


@dataclass(frozen=True, eq=False)
class FormFamily:
    op: SpectralOperator
    grid: TimeGrid
    a_matrices: np.ndarray
    M: float
    nu: float
    kappa: float = 0.0
    lambda_shift: float = 0.0
    zeroth: np.ndarray | None = None
    omega: float = 0.0

    def __post_init__(self):
        d, n = self.op.dim, self.grid.n_steps
        if n < 2:
            raise SpecError("parabolic solvers need n_steps >= 2")
        a = np.array(self.a_matrices, dtype=complex)
        if a.shape == (d, d):
            a = np.broadcast_to(a, (n + 1, d, d)).copy()
        if a.shape != (n + 1, d, d):
            raise SpecError(f"A has shape {a.shape}, expected ({n + 1}, {d}, {d})")
        a.setflags(write=False)
        object.__setattr__(self, "a_matrices", a)
        if self.zeroth is not None:
            c = np.array(self.zeroth, dtype=complex)
            if c.shape == (d, d):
                c = np.broadcast_to(c, (n + 1, d, d)).copy()
            if c.shape != (n + 1, d, d):
                raise SpecError(f"zeroth-order part has shape {c.shape}")
            c.setflags(write=False)
            object.__setattr__(self, "zeroth", c)
        if not (self.M > 0 and self.nu > 0 and self.kappa >= 0 and self.lambda_shift >= 0):
            raise SpecError("need M > 0, nu > 0, kappa >= 0, lambda >= 0")
        if not np.all(np.isfinite(a)):
            raise SpecError("A contains non-finite entries")

    @classmethod
    def from_function(cls, op, grid, a_fn: Callable, M, nu, kappa=0.0, lambda_shift=0.0, zeroth_fn=None):
        """Sample A(t) (and optionally C(t)) at every grid time."""
        a = np.array([a_fn(t) for t in grid.times])
        c = None if zeroth_fn is None else np.array([zeroth_fn(t) for t in grid.times])
        return cls(op, grid, a, M, nu, kappa, lambda_shift, c)

    @property
    def shifted_op(self) -> SpectralOperator:
        return shift(self.op, self.lambda_shift)

    @property
    def kappa_prime(self) -> float:
        return self.kappa + 1.0 if self.kappa > 0 else 0.0

    def generators(self) -> np.ndarray:
        """L_k = S~ A_k S~ + C_k for every grid time, shape (n+1, d, d); excludes omega."""
        s = self.shifted_op.eigenvalues
        gen = s[None, :, None] * self.a_matrices * s[None, None, :]
        if self.zeroth is not None:
            gen = gen + self.zeroth
        return gen

    def adjoint(self) -> "FormFamily":
        """Family of B*(u, v) = conj(B(v, u)), i.e. A -> A*."""
        z = None if self.zeroth is None else np.conj(np.swapaxes(self.zeroth, 1, 2))
        return replace(self, a_matrices=np.conj(np.swapaxes(self.a_matrices, 1, 2)), zeroth=z)

    def shifted(self, omega: float) -> "FormFamily":
        """Family of B + omega <u, v>, with omega applied as an exact per-step factor."""
        return replace(self, omega=self.omega + omega)

    def on_grid(self, grid: TimeGrid) -> "FormFamily":
        if grid != self.grid:
            raise ContractError("form family and grid differ")
        return self


def form_apply(ff: FormFamily, k: int, u, v) -> complex:
    """B_k(u, v) (plus omega <u, v> when the family is shifted)."""
    if not 0 <= k <= ff.grid.n_steps:
        raise IndexError(f"step {k} outside 0..{ff.grid.n_steps}")
    u, v = ff.op.coords(u), ff.op.coords(v)
    s = ff.shifted_op.eigenvalues
    val = np.vdot(s * v, ff.a_matrices[k] @ (s * u))
    if ff.zeroth is not None:
        val += np.vdot(v, ff.zeroth[k] @ u)
    return complex(val + ff.omega * np.vdot(v, u))


# ---------------------------------------------------------------- ellipticity


def exact_ellipticity(ff: FormFamily) -> tuple[float, float]:
    """(smallest valid M, largest valid nu) for the declared kappa, from the reduced matrices.

    Works in S~-scaled coordinates x = S~ u; needs S~ injective when a zeroth
    part or kappa is present.
    """
    s = ff.shifted_op.eigenvalues
    a = ff.a_matrices
    if ff.zeroth is not None or ff.kappa > 0:
        if s[0] == 0:
            raise DomainError("S not injective: lower-order terms are unbounded in the S~ norm")
        inv = 1.0 / s
        extra = np.zeros_like(a) if ff.zeroth is None else inv[None, :, None] * ff.zeroth * inv[None, None, :]
        a_red = a + extra
        coer = a_red + ff.kappa * np.diag(inv**2)[None]
    else:
        keep = s > 0
        a_red = a[:, keep][:, :, keep]
        coer = a_red
    m_true = float(np.max(np.linalg.norm(a_red, ord=2, axis=(1, 2))))
    herm = 0.5 * (coer + np.conj(np.swapaxes(coer, 1, 2)))
    nu_true = float(np.min(np.linalg.eigvalsh(herm)))
    return m_true, nu_true


def sampled_ellipticity(ff: FormFamily, n_probes: int = 64, seed: int = 0) -> Report:
    """Boundedness and coercivity on random probe pairs at every grid time."""
    rng = np.random.default_rng(seed)
    d = ff.op.dim
    s = ff.shifted_op.eigenvalues
    worst_bound, worst_coer = -np.inf, -np.inf
    gen = ff.generators()
    for _ in range(n_probes):
        u = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        su, sv = np.linalg.norm(s * u), np.linalg.norm(s * v)
        if su == 0 or sv == 0:
            continue
        b_uv = np.einsum("i,kij,j->k", v.conj(), gen, u)
        b_uu = np.einsum("i,kij,j->k", u.conj(), gen, u)
        worst_bound = max(worst_bound, float(np.max(np.abs(b_uv))) / (su * sv), float(np.max(np.abs(b_uu))) / su**2)
        coer = (b_uu.real + ff.kappa * np.vdot(u, u).real) / su**2
        worst_coer = max(worst_coer, float(np.max(ff.nu - coer)))
    rep = Report()
    rep.add(
        inequality("boundedness", worst_bound, ff.M, 1e-12 * ff.M, "uniform boundedness of the forms"),
        inequality("coercivity", worst_coer, 0.0, 1e-12 * ff.nu, "uniform coercivity of the forms"),
    )
    return rep


# ---------------------------------------------------------------- step maps


def _check_cauchy_grid(ff: FormFamily, grid: TimeGrid) -> None:
    ff.on_grid(grid)
    if grid.kind is GridKind.WINDOW:
        raise ContractError("Cauchy problems need a bounded or half_line grid")
    if grid.kind is GridKind.HALF_LINE:
        if ff.kappa != 0:
            raise ContractError("kappa > 0 is only supported on bounded grids")
        if not (ff.lambda_shift > 0 or ff.op.injective):
            raise ContractError("half-line problems need lambda > 0 or an injective S")


def step_maps(ff: FormFamily, scheme: str = "implicit_euler", adjoint: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """(P_k, Q_k) with u_{k+1} = P_k u_k + Q_k src_k for k = 0..n-1.

    With ``adjoint=True`` the maps of the backward problem -du/ds + L* u = 0,
    which for matching schemes are the exact adjoints of the forward maps.
    """
    if scheme not in SCHEMES:
        raise ArgumentError(f"unknown scheme {scheme!r}")
    n, d, dt = ff.grid.n_steps, ff.op.dim, ff.grid.dt
    gen = ff.generators()[:n] + ff.kappa_prime * np.eye(d)[None]
    if adjoint:
        gen = np.conj(np.swapaxes(gen, 1, 2))
    factor = math.exp(-(ff.omega - ff.kappa_prime) * dt)
    eye = np.eye(d)[None]
    try:
        if scheme == "implicit_euler":
            inv = np.linalg.inv(eye + dt * gen)
            p = factor * inv
        else:
            inv = np.linalg.inv(eye + 0.5 * dt * gen)
            p = factor * inv @ (eye - 0.5 * dt * gen)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"singular step matrix: {exc}") from exc
    q = factor * dt * inv
    if adjoint and scheme == "crank_nicolson":
        # adjoint of inv @ (I - dt/2 G) is (I - dt/2 G*) @ inv*, with gen already conjugated
        p = factor * (eye - 0.5 * dt * gen) @ inv
    if not np.all(np.isfinite(p)):
        raise NumericError("non-finite step map")
    return p, q


def cauchy_step_solve(
    ff: FormFamily, a, src: SourceSpec | None, grid: TimeGrid, scheme: str = "implicit_euler"
) -> Trajectory:
    """du/dt + L(t) u = src on the grid with u(t0) = a (plus any Dirac mass at t0)."""
    _check_cauchy_grid(ff, grid)
    a = ff.op.coords(a)
    p, q = step_maps(ff, scheme)
    n = grid.n_steps
    u = np.zeros((n + 1, ff.op.dim), dtype=complex)
    u[0] = a
    if src is None:
        dens = np.zeros_like(u)
        kicks = np.zeros_like(u)
    else:
        if src.grid != grid:
            raise ContractError("source and solver grids differ")
        dens, kicks = src.density(), src.dirac_kicks()
    u[0] = u[0] + kicks[0]
    for k in range(n):
        u[k + 1] = p[k] @ u[k] + q[k] @ dens[k] + kicks[k + 1]
    return Trajectory(grid, ff.op, u)


# ---------------------------------------------------------------- Kaplan solver


@dataclass(frozen=True, eq=False)
class KaplanSystem:
    ff: FormFamily
    delta: float
    rhs: np.ndarray  # (I + delta H)* applied to the source samples, shape (N, d)

    @property
    def shape(self) -> tuple[int, int]:
        return self.rhs.shape

    def _time_symbols(self):
        grid = self.ff.grid
        tau = ta.FrequencyGrid.for_grid(grid).frequencies
        weight = 1 - 1j * self.delta * np.sign(tau)  # symbol of (I + delta H)*
        return tau, weight

    def heat_part(self, u: np.ndarray) -> np.ndarray:
        """Unmodified operator: time derivative plus S A_j S, on periodic samples (N, d)."""
        tau, _ = self._time_symbols()
        du = np.fft.ifft(1j * tau[:, None] * np.fft.fft(u, axis=0), axis=0)
        gen = self.ff.generators()[: u.shape[0]]
        return du + np.einsum("kij,kj->ki", gen, u)

    def apply(self, u: np.ndarray) -> np.ndarray:
        _, weight = self._time_symbols()
        hu = self.heat_part(u)
        return np.fft.ifft(weight[:, None] * np.fft.fft(hu, axis=0), axis=0)

    def preconditioner(self) -> Callable[[np.ndarray], np.ndarray]:
        tau, weight = self._time_symbols()
        gen_mean = self.ff.generators()[: self.shape[0]].mean(axis=0)
        blocks = 1j * tau[:, None, None] * np.eye(self.shape[1])[None] + gen_mean[None]
        inv = np.linalg.inv(blocks) / weight[:, None, None]

        def solve(r: np.ndarray) -> np.ndarray:
            rf = np.fft.fft(r, axis=0)
            return np.fft.ifft(np.einsum("kij,kj->ki", inv, rf), axis=0)

        return solve


def kaplan_system(ff: FormFamily, src: SourceSpec) -> KaplanSystem:
    grid = ff.grid
    ta.require_window(grid, "kaplan_solve")
    if not ff.op.injective:
        raise DomainError("S not injective")
    if ff.lambda_shift != 0 or ff.kappa != 0 or ff.zeroth is not None or ff.omega != 0:
        raise ContractError("the variational solver handles homogeneous forms only")
    if src.grid != grid:
        raise ContractError("source and solver grids differ")
    delta = ff.nu / (1 + ff.M)
    n = grid.n_steps
    dens = src.density()[:n] + src.dirac_kicks()[:n] / grid.dt
    tau = ta.FrequencyGrid.for_grid(grid).frequencies
    weight = 1 - 1j * delta * np.sign(tau)
    rhs = np.fft.ifft(weight[:, None] * np.fft.fft(dens, axis=0), axis=0)
    return KaplanSystem(ff, delta, rhs)


def kaplan_solve(ff: FormFamily, src: SourceSpec, grid: TimeGrid, rtol: float = 1e-10) -> Trajectory:
    """Solve B_V0(u, (1 + delta H) v) = <(1 + delta H)* src, v> on the periodic window."""
    ff.on_grid(grid)
    sysm = kaplan_system(ff, src)
    n, d = sysm.shape
    b = sysm.rhs.ravel()
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return Trajectory.zeros(ff.op, grid)
    amat = LinearOperator((n * d, n * d), matvec=lambda x: sysm.apply(x.reshape(n, d)).ravel(), dtype=complex)
    pre = sysm.preconditioner()
    pmat = LinearOperator((n * d, n * d), matvec=lambda x: pre(x.reshape(n, d)).ravel(), dtype=complex)
    x0 = pre(sysm.rhs).ravel()
    x, info = gmres(amat, b, x0=x0, M=pmat, rtol=rtol * 1e-2, atol=0, restart=60, maxiter=200)
    res = np.linalg.norm(amat.matvec(x) - b) / bnorm
    if res > rtol:
        raise NumericError(f"variational solve stalled at relative residual {res:.2e} (gmres info {info})")
    vals = x.reshape(n, d)
    return Trajectory(grid, ff.op, np.vstack([vals, vals[:1]]), flags=ta.edge_flags(Trajectory(grid, ff.op, src.density())))


def kaplan_form(ff: FormFamily, u: Trajectory, v: Trajectory) -> complex:
    """B_V0(u, v) = int <du/dt, v> + B_t(u, v) dt on the periodic window (time derivative spectral)."""
    ta.require_window(u.grid, "kaplan_form")
    sysm = KaplanSystem(ff, 0.0, np.zeros((u.grid.n_steps, ff.op.dim)))
    hu = sysm.heat_part(ta.periodic_samples(u))
    return complex(u.grid.dt * np.sum(hu * ta.periodic_samples(v).conj()))


def kaplan_coercivity(ff: FormFamily, u: Trajectory) -> tuple[float, float]:
    """(Re B_V0(u, (1 + delta H) u), delta ||u||_V0^2) with delta = nu / (1 + M)."""
    delta = ff.nu / (1 + ff.M)
    test = u + delta * ta.hilbert_transform(u)
    lhs = kaplan_form(ff, u, test).real
    return lhs, delta * ta.v_alpha_norm(u, 0.0) ** 2


def kaplan_bound_constant(M: float, nu: float) -> float:
    delta = nu / (1 + M)
    return (1 + M) / nu * math.sqrt(1 + delta**2)


def v0_star_norm(src: SourceSpec, method: str = "dual") -> float:
    """Norm of a source in V_0*.

    ``dual`` is the exact dual norm for the window discretisation. ``decomposition``
    is the sum over the given parts, each written as S applied to an L^2(H)
    density; it bounds the dual norm from above.
    """
    if method == "dual":
        dens = src.density() + src.dirac_kicks() / src.grid.dt
        return ta.v0_dual_norm(Trajectory(src.grid, src.op, dens))
    if method != "decomposition":
        raise ArgumentError(f"unknown method {method!r}")
    total = 0.0
    if src.f2 is not None:
        total += ta.l2_norm(src.f2)
    if src.g is not None:
        total += ta.l2_norm(src.g, src.beta - 1)
    if src.h1 is not None:
        total += ta.l2_norm(src.h1, -1.0)
    return total


def kaplan_report(ff: FormFamily, src: SourceSpec, u: Trajectory) -> Report:
    const = kaplan_bound_constant(ff.M, ff.nu)
    ratio_rhs = const * v0_star_norm(src)
    rep = Report()
    rep.add(inequality("solution_bound", ta.v_alpha_norm(u, 0.0), ratio_rhs, 1e-10 * ratio_rhs + 1e-14,
                       "variational solution bound with hidden coercivity"))
    lhs, rhs = kaplan_coercivity(ff, u)
    rep.add(inequality("hidden_coercivity", -lhs, -rhs, 1e-8, "hidden coercivity of the modified form"))
    return rep


# ---------------------------------------------------------------- energy


def energy_residuals(ff: FormFamily, u: Trajectory, src: SourceSpec | None) -> np.ndarray:
    """Signed per-step residuals of the energy equality; NaN on steps ending in a Dirac kick.

    ||u_{k+1}||^2 - ||u_k||^2 + 2 Re int B(u, u) - 2 Re int <src, u>, trapezoid in time.
    """
    n, dt = u.grid.n_steps, u.grid.dt
    gen = ff.generators()[:n] + ff.omega * np.eye(ff.op.dim)[None]
    vals = u.values
    b_left = np.einsum("ki,kij,kj->k", vals[:-1].conj(), gen, vals[:-1]).real
    b_right = np.einsum("ki,kij,kj->k", vals[1:].conj(), gen, vals[1:]).real
    form_int = 0.5 * dt * (b_left + b_right)
    if src is not None:
        dens = src.density()
        pair = np.sum(dens * vals.conj(), axis=1).real
        src_int = 0.5 * dt * (pair[:-1] + pair[1:])
    else:
        src_int = np.zeros(n)
    norms = np.sum(np.abs(vals) ** 2, axis=1)
    res = norms[1:] - norms[:-1] + 2 * form_int - 2 * src_int
    if src is not None:
        for idx in src.dirac_indices():
            if idx > 0:
                res[idx - 1] = np.nan
    return res


def max_interval_residual(per_step: np.ndarray) -> float:
    """Largest |sum of residuals| over all runs of consecutive steps not crossing a Dirac step."""
    best = 0.0
    for seg in np.split(per_step, np.flatnonzero(np.isnan(per_step))):
        seg = seg[~np.isnan(seg)]
        if seg.size == 0:
            continue
        prefix = np.concatenate([[0.0], np.cumsum(seg)])
        best = max(best, float(prefix.max() - prefix.min()))
    return best


def sup_norm_constant(u: Trajectory, a, src: SourceSpec | None) -> float:
    """Measured ratio sup||u|| / (||f||_2 + ||g||_{rho'} + ||h||_1 + ||a||)."""
    denom = float(np.linalg.norm(u.op.coords(a)))
    if src is not None:
        w = src.grid.weights()
        if src.f2 is not None:
            denom += ta.l2_norm(src.f2)
        if src.g is not None:
            rp = src.rho / (src.rho - 1) if math.isfinite(src.rho) else 1.0
            denom += float(np.sum(w * src.g.pointwise_norms() ** rp) ** (1 / rp))
        if src.h1 is not None:
            denom += ta.l1_norm(src.h1)
        denom += sum(float(np.linalg.norm(b)) for _, b in src.diracs)
    return ta.sup_norm(u) / denom if denom > 0 else 0.0


def energy_report(ff: FormFamily, u: Trajectory, src: SourceSpec | None, tol_per_dt: float | None = None) -> Report:
    """Energy equality residual on every subinterval; the tolerance is C dt when ``tol_per_dt`` is given."""
    per_step = energy_residuals(ff, u, src)
    worst = max_interval_residual(per_step)
    scale = max(ta.sup_norm(u) ** 2, 1e-300)
    rep = Report()
    tol = math.inf if tol_per_dt is None else tol_per_dt * u.grid.dt * scale
    rep.add(residual("energy_equality", worst, tol, "energy equality of the weak solution"))
    rep.tables["energy"] = [{"dt": u.grid.dt, "max_residual": worst, "max_step_residual": float(np.nanmax(np.abs(per_step))) if per_step.size else 0.0}]
    return rep


def convergence_order(dts, errors) -> list[float]:
    """Observed orders log(e_k / e_{k+1}) / log(dt_k / dt_{k+1}) for consecutive levels."""
    out = []
    for (d0, e0), (d1, e1) in zip(zip(dts, errors), zip(dts[1:], errors[1:])):
        if e0 <= 0 or e1 <= 0:
            out.append(math.nan)
        else:
            out.append(math.log(e0 / e1) / math.log(d0 / d1))
    return out


def exponential_shift_check(ff: FormFamily, omega: float, grid: TimeGrid) -> Report:
    """max ||Gamma_{B+omega}(t_i, t_j) - exp(-omega (t_i - t_j)) Gamma_B(t_i, t_j)||."""
    from .propagator import assemble_green  # propagator depends on this module

    if omega < 0:
        raise ArgumentError("omega must be nonnegative")
    if not ff.op.injective or ff.kappa != 0:
        raise ContractError("exponential shift check needs an injective S and kappa = 0")
    base = assemble_green(ff, grid).dense()
    moved = assemble_green(ff.shifted(omega), grid).dense()
    t = grid.times
    decay = np.exp(-omega * np.subtract.outer(t, t))
    mask = np.tril(np.ones((grid.n_steps + 1,) * 2, dtype=bool))
    diff = moved - np.where(mask, decay, 0.0)[:, :, None, None] * base
    res = float(np.max(np.linalg.norm(diff, axis=(2, 3))))
    rep = Report()
    rep.add(residual("exponential_shift", res, 1e-10, "exponential shift of the fundamental solution"))
    return rep


# ---------------------------------------------------------------- coefficient models


def identity_coefficient(d: int) -> Callable:
    eye = np.eye(d)
    return lambda t: eye


def rotation_coefficient(d: int, angle: float = math.pi / 4, wobble: float = 0.0) -> Callable:
    """cos(theta) I + sin(theta) J with J a block rotation; Re part cos(theta) I, norm 1."""
    j = np.zeros((d, d))
    for i in range(0, d - 1, 2):
        j[i, i + 1], j[i + 1, i] = -1.0, 1.0
    last = np.zeros((d, d))
    if d % 2:
        last[-1, -1] = 1.0

    def a(t):
        th = angle * (1 - wobble * (1 + math.sin(t)) / 2)
        return math.cos(th) * (np.eye(d) - last) + math.sin(th) * j + last

    return a


def random_accretive_coefficient(d: int, seed: int, nu: float = 0.5, spread: float = 0.5, skew: float = 0.5):
    """A(t) = nu I + P(t) + i Q(t): P(t) a moving convex mix of PSD matrices of norm <= spread,
    Q(t) Hermitian of norm <= skew with a sign flip, so nu <= Re A and |A| <= nu + spread + skew.
    """
    rng = np.random.default_rng(seed)

    def psd():
        b = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        p = b @ b.conj().T
        return p / np.linalg.norm(p, 2)

    def herm():
        b = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        h = b + b.conj().T
        return h / np.linalg.norm(h, 2)

    p0, p1, q0 = psd(), psd(), herm()
    w1, w2, phase = rng.uniform(1.0, 3.0), rng.uniform(1.0, 3.0), rng.uniform(0, 2 * math.pi)

    def a(t):
        c = 0.5 * (1 + math.cos(w1 * t + phase))
        sgn = 1.0 if math.sin(w2 * t) >= 0 else -0.5
        return nu * np.eye(d) + spread * (c * p0 + (1 - c) * p1) + 1j * skew * sgn * q0

    return a, nu, nu + spread + skew


@dataclass(frozen=True)
class CoefficientModel:
    """Grid-independent coefficient description, sampled onto any grid by ``family``."""

    kind: str
    dim: int
    seed: int = 0
    M: float | None = None
    nu: float | None = None
    kappa: float = 0.0
    lambda_shift: float = 0.0
    zeroth_scale: float = 0.0

    def build(self) -> tuple[Callable, float, float]:
        if self.kind == "identity":
            fn, nu, m = identity_coefficient(self.dim), 1.0, 1.0
        elif self.kind == "rotation":
            fn = rotation_coefficient(self.dim, math.pi / 4, wobble=0.5)
            nu, m = math.cos(math.pi / 4), 1.0
        elif self.kind == "random_accretive":
            fn, nu, m = random_accretive_coefficient(self.dim, self.seed)
        else:
            raise SpecError(f"unknown coefficient kind {self.kind!r}")
        return fn, (nu if self.nu is None else self.nu), (m if self.M is None else self.M)

    def family(self, op: SpectralOperator, grid: TimeGrid) -> FormFamily:
        if op.dim != self.dim:
            raise ContractError("coefficient model and operator dimensions differ")
        fn, nu, m = self.build()
        zeroth = None
        if self.zeroth_scale:
            zeroth = -self.zeroth_scale * np.eye(self.dim)
        return FormFamily.from_function(op, grid, fn, m, nu, self.kappa, self.lambda_shift,
                                        None if zeroth is None else (lambda t: zeroth))

"""Green operators on a time grid, stored as composed one-step maps.

A forward family holds G(t_i, t_j) for i >= j; a backward family holds the
backward Green operators G~(t_j, t_i) for j <= i. ``block(row, col)`` always
takes the two time indices in the order the operator is written, so causality
means ``block(i, j) = 0`` for i < j (forward) and for i > j (backward).

Block norms in residuals are Frobenius norms, an upper bound for the operator
norm; the uniform bound of a family is recorded with the operator norm.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractError, SpecError
from .heat_engine import SourceSpec
from .parabolic_engine import FormFamily, _check_cauchy_grid, step_maps
from .report import Report, inequality, residual
from .spectral_core import SpectralOperator
from .time_analysis import GridKind, TimeGrid, Trajectory

DENSE_LIMIT = 200_000_000  # complex scalars


@dataclass(eq=False)
class PropagatorFamily:
    grid: TimeGrid
    dim: int
    direction: str = "forward"
    steps: np.ndarray | None = None  # one-step maps, shape (n, d, d)
    _dense: np.ndarray | None = field(default=None, repr=False)
    dense_limit: int = DENSE_LIMIT

    def __post_init__(self):
        if self.direction not in ("forward", "backward"):
            raise SpecError(f"unknown direction {self.direction!r}")
        if self.steps is None and self._dense is None:
            raise SpecError("a family needs step maps or dense blocks")
        if self.steps is not None:
            if self.steps.shape != (self.grid.n_steps, self.dim, self.dim):
                raise SpecError(f"step maps have shape {self.steps.shape}")
            self.steps.setflags(write=False)

    @property
    def n(self) -> int:
        return self.grid.n_steps + 1

    def _causal(self, i: int, j: int) -> bool:
        return i >= j if self.direction == "forward" else i <= j

    def block(self, i: int, j: int) -> np.ndarray:
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise IndexError(f"block ({i}, {j}) outside the grid")
        if self._dense is not None:
            return self._dense[i, j]
        if not self._causal(i, j):
            return np.zeros((self.dim, self.dim), dtype=complex)
        out = np.eye(self.dim, dtype=complex)
        if self.direction == "forward":
            for k in range(j, i):
                out = self.steps[k] @ out
        else:
            for k in range(j - 1, i - 1, -1):
                out = self.steps[k] @ out
        return out

    def dense(self) -> np.ndarray:
        """All blocks as an array indexed [row time, column time, :, :]."""
        if self._dense is not None:
            return self._dense
        size = self.n * self.n * self.dim * self.dim
        if size > self.dense_limit:
            raise ContractError(f"dense family needs {size} scalars, above the limit {self.dense_limit}")
        d, n = self.dim, self.n
        out = np.zeros((n, n, d, d), dtype=complex)
        eye = np.eye(d)
        if self.direction == "forward":
            for i in range(n):
                out[i, i] = eye
                if i > 0:
                    out[i, :i] = np.matmul(self.steps[i - 1][None], out[i - 1, :i])
        else:
            for i in range(n - 1, -1, -1):
                out[i, i] = eye
                if i < n - 1:
                    out[i, i + 1 :] = np.matmul(self.steps[i][None], out[i + 1, i + 1 :])
        out.setflags(write=False)
        self._dense = out
        return out

    def with_dense(self, blocks: np.ndarray) -> "PropagatorFamily":
        """Family carrying explicit blocks (no step maps), e.g. a perturbed copy."""
        blocks = np.array(blocks, dtype=complex)
        return PropagatorFamily(self.grid, self.dim, self.direction, None, blocks, self.dense_limit)

    def uniform_bound(self) -> float:
        blocks = self.dense()
        idx_i, idx_j = np.nonzero(self._causal_mask())
        return float(np.max(np.linalg.norm(blocks[idx_i, idx_j], ord=2, axis=(1, 2))))

    def _causal_mask(self) -> np.ndarray:
        m = np.tril(np.ones((self.n, self.n), dtype=bool))
        return m if self.direction == "forward" else m.T

    def decay_diagnostic(self) -> np.ndarray:
        """||G(t_max, t_j)|| for each j (forward) - the grid stand-in for G(infinity, s) = 0."""
        blocks = self.dense()
        if self.direction == "forward":
            return np.linalg.norm(blocks[-1], ord=2, axis=(1, 2))
        return np.linalg.norm(blocks[:, -1], ord=2, axis=(1, 2))


def _assemble(ff: FormFamily, grid: TimeGrid, scheme: str, adjoint: bool) -> PropagatorFamily:
    _check_cauchy_grid(ff, grid)
    p, _ = step_maps(ff, scheme, adjoint=adjoint)
    return PropagatorFamily(grid, ff.op.dim, "backward" if adjoint else "forward", np.ascontiguousarray(p))


def assemble_green(ff: FormFamily, grid: TimeGrid, scheme: str = "implicit_euler") -> PropagatorFamily:
    """Forward family from the one-step solution maps (columns = solves from basis vectors)."""
    return _assemble(ff, grid, scheme, adjoint=False)


def assemble_backward(ff: FormFamily, grid: TimeGrid, scheme: str = "implicit_euler") -> PropagatorFamily:
    """Backward family of -d/ds + B* with final data, on the reversed grid."""
    return _assemble(ff, grid, scheme, adjoint=True)


def check_invariants(pf: PropagatorFamily, tol: float = 1e-12) -> Report:
    blocks = pf.dense()
    mask = pf._causal_mask()
    rep = Report()
    acausal = float(np.max(np.abs(blocks[~mask]))) if (~mask).any() else 0.0
    diag = np.max(np.abs(blocks[np.arange(pf.n), np.arange(pf.n)] - np.eye(pf.dim)))
    bound = pf.uniform_bound()
    rep.add(
        residual("causality", acausal, 0.0, "causality of the fundamental solution"),
        residual("identity_on_diagonal", float(diag), tol, "Green operator at equal times is the identity"),
        inequality("uniform_bound_finite", 0.0 if math.isfinite(bound) else 1.0, 0.0, 0.0,
                   "uniform boundedness of the fundamental solution"),
    )
    rep.tables["uniform_bound"] = [{"value": bound}]
    return rep


def chapman_kolmogorov_residual(pf: PropagatorFamily) -> float:
    """max over ordered triples of ||G(i, j) - G(i, k) G(k, j)|| (Frobenius)."""
    blocks = pf.dense()
    n = pf.n
    worst = 0.0
    for i in range(n):
        for j in range(i + 1):
            ks = np.arange(j, i + 1)
            if pf.direction == "forward":
                # G(i, j) = G(i, k) G(k, j) for j <= k <= i
                prod = np.matmul(blocks[i, ks], blocks[ks, j])
                target = blocks[i, j]
            else:
                # G~(j, i) = G~(j, k) G~(k, i) for j <= k <= i
                prod = np.matmul(blocks[j, ks], blocks[ks, i])
                target = blocks[j, i]
            diff = target[None] - prod
            worst = max(worst, float(np.max(np.linalg.norm(diff, axis=(1, 2)))))
    return worst


def adjointness_residual(forward: PropagatorFamily, backward: PropagatorFamily) -> float:
    """max over i >= j of ||G(t_i, t_j)* - G~(t_j, t_i)|| (Frobenius)."""
    if forward.grid != backward.grid or forward.direction != "forward" or backward.direction != "backward":
        raise ContractError("need a forward and a backward family on one grid")
    f = forward.dense()
    b = backward.dense()
    diff = np.conj(np.swapaxes(f, 2, 3)) - np.swapaxes(b, 0, 1)
    mask = forward._causal_mask()
    return float(np.max(np.linalg.norm(diff[mask], axis=(1, 2))))


def represent(
    pf: PropagatorFamily,
    pf_back: PropagatorFamily,
    a,
    src: SourceSpec | None,
    op: SpectralOperator | None = None,
    quadrature: str = "trapezoid",
) -> Trajectory:
    """Representation of the weak solution through the Green families.

    The S f2 and S^beta g parts are integrated in weak form against the
    backward family, component m being the integral of <f(s), S G~(s, t) e_m>;
    the h part is a Bochner quadrature with the forward family and each Dirac
    mass is propagated atomically from its grid index.
    """
    if pf.grid != pf_back.grid or pf.direction != "forward" or pf_back.direction != "backward":
        raise ContractError("represent needs forward and backward families on one grid")
    if quadrature not in ("trapezoid", "left"):
        raise ContractError(f"unknown quadrature {quadrature!r}")
    grid = pf.grid
    if src is not None:
        if src.grid != grid:
            raise ContractError("source grid differs from the family grid")
        op = src.op
    if op is None:
        raise ContractError("an operator is needed when there is no source")
    a = op.coords(a)
    fwd = pf.dense()
    bwd = pf_back.dense()
    n = grid.n_steps
    dt = grid.dt
    u = np.einsum("iab,b->ia", fwd[:, 0], a)
    if src is None:
        return Trajectory(grid, op, u)

    zeros = np.zeros((n + 1, op.dim), dtype=complex)
    weak_f = src.f2.values if src.f2 is not None else zeros
    weak_g = src.g.values if src.g is not None else zeros
    s1 = op.power_factors(1.0)
    sb = op.power_factors(src.beta) if src.g is not None else np.zeros(op.dim)
    h = src.h1.values if src.h1 is not None else zeros

    for i in range(1, n + 1):
        w = np.full(i + 1, dt)
        if quadrature == "trapezoid":
            w[0] = w[-1] = 0.5 * dt
        else:
            w[-1] = 0.0
        # weak parts: columns S^p G~(s, t_i) e_m, paired with the densities
        back_cols = bwd[: i + 1, i]  # G~(t_s, t_i), s = 0..i
        weak = np.einsum("sam,sa->sm", np.conj(s1[None, :, None] * back_cols), weak_f[: i + 1])
        weak += np.einsum("sam,sa->sm", np.conj(sb[None, :, None] * back_cols), weak_g[: i + 1])
        strong = np.einsum("sab,sb->sa", fwd[i, : i + 1], h[: i + 1])
        u[i] += np.einsum("s,sa->a", w, weak + strong)
    for s, mass in src.diracs:
        k = grid.index_at_or_after(s)
        u[k:] += np.einsum("iab,b->ia", fwd[k:, k], mass)
    return Trajectory(grid, op, u)


def restrict(pf: PropagatorFamily, stride: int) -> PropagatorFamily:
    """Family on the coarse grid taking every ``stride``-th time (compose consecutive steps)."""
    if pf.grid.n_steps % stride:
        raise ContractError("stride must divide n_steps")
    if pf.steps is None:
        raise ContractError("restriction needs step maps")
    coarse = TimeGrid(pf.grid.t0, pf.grid.t1, pf.grid.n_steps // stride, pf.grid.kind)
    steps = []
    for m in range(coarse.n_steps):
        out = np.eye(pf.dim, dtype=complex)
        for k in range(m * stride, (m + 1) * stride):
            out = pf.steps[k] @ out if pf.direction == "forward" else out @ pf.steps[k]
        steps.append(out)
    return PropagatorFamily(coarse, pf.dim, pf.direction, np.array(steps), None, pf.dense_limit)


def max_block_difference(pf1: PropagatorFamily, pf2: PropagatorFamily) -> float:
    if pf1.grid != pf2.grid or pf1.dim != pf2.dim or pf1.direction != pf2.direction:
        raise ContractError("families live on different grids")
    return float(np.max(np.linalg.norm(pf1.dense() - pf2.dense(), axis=(2, 3))))


def fundamental_uniqueness_probe(pf1: PropagatorFamily, pf2: PropagatorFamily, tol: float) -> bool:
    return max_block_difference(pf1, pf2) <= tol


def lr_column_constant(pf: PropagatorFamily, op: SpectralOperator, r: float, n_probes: int = 32, seed: int = 0) -> float:
    """Measured C with sum_i dt ||S^(2/r) G(t_i, t_j) a||^r <= C^r ||a||^r over all columns j."""
    if r not in (2, 4):
        raise ContractError("column estimate is implemented for r in {2, 4}")
    alpha = 2.0 / r
    blocks = pf.dense()
    p = op.power_factors(alpha)
    rng = np.random.default_rng(seed)
    probes = np.vstack([np.eye(op.dim), rng.standard_normal((n_probes, op.dim)) + 1j * rng.standard_normal((n_probes, op.dim))])
    probes /= np.linalg.norm(probes, axis=1, keepdims=True)
    best = 0.0
    dt = pf.grid.dt
    for j in range(pf.n):
        col = p[None, :, None] * blocks[j:, j]  # S^alpha G(t_i, t_j), i >= j
        w = np.full(col.shape[0], dt)
        w[0] = w[-1] = 0.5 * dt
        if col.shape[0] == 1:
            continue
        if r == 2:
            gram = np.einsum("i,iab,iac->bc", w, np.conj(col), col)
            best = max(best, float(np.linalg.eigvalsh(gram)[-1]))
        else:
            vals = np.linalg.norm(np.einsum("iab,pb->pia", col, probes), axis=2)
            best = max(best, float(np.max(np.sum(w[None] * vals**r, axis=1))))
    return best ** (1.0 / r)


def propagator_report(ff: FormFamily, grid: TimeGrid, scheme: str = "implicit_euler") -> tuple[PropagatorFamily, PropagatorFamily, Report]:
    fwd = assemble_green(ff, grid, scheme)
    bwd = assemble_backward(ff, grid, scheme)
    rep = Report()
    rep.extend(check_invariants(fwd), "forward_")
    rep.extend(check_invariants(bwd), "backward_")
    rep.add(
        residual("chapman_kolmogorov", chapman_kolmogorov_residual(fwd), 1e-12, "Chapman-Kolmogorov identity"),
        residual("adjointness", adjointness_residual(fwd, bwd), 1e-12, "adjointness of forward and backward Green operators"),
    )
    if ff.kappa == 0 and ff.zeroth is None and ff.omega >= 0:
        rep.add(inequality("green_contraction", fwd.uniform_bound(), 1.0, 1e-12, "Green operators of accretive families are contractions"))
    rep.tables["lr_column"] = [{"r": r, "C": lr_column_constant(fwd, ff.op, r)} for r in (2, 4)]
    if grid.kind is GridKind.HALF_LINE:
        rep.tables["decay"] = [{"j": j, "norm": float(x)} for j, x in enumerate(fwd.decay_diagnostic())]
    return fwd, bwd, rep


# ---------------------------------------------------------------- serialization


def dump_propagator(pf: PropagatorFamily) -> dict:
    blocks = pf.dense()
    mask = pf._causal_mask()
    out = []
    for i, j in zip(*np.nonzero(mask)):
        b = blocks[i, j]
        out.append({"i": int(i), "j": int(j), "re": b.real.ravel().tolist(), "im": b.imag.ravel().tolist()})
    return {"header": {"grid": pf.grid.to_dict(), "dim": pf.dim, "direction": pf.direction}, "blocks": out}


def load_propagator_dict(doc: dict, tol: float = 1e-12) -> PropagatorFamily:
    if set(doc) != {"header", "blocks"}:
        raise SpecError("propagator document needs exactly 'header' and 'blocks'")
    head = doc["header"]
    grid = TimeGrid(**head["grid"])
    d = int(head["dim"])
    n = grid.n_steps + 1
    blocks = np.zeros((n, n, d, d), dtype=complex)
    for b in doc["blocks"]:
        vals = np.array(b["re"], dtype=float) + 1j * np.array(b["im"], dtype=float)
        if vals.size != d * d:
            raise SpecError("block has the wrong number of entries")
        blocks[b["i"], b["j"]] = vals.reshape(d, d)
    pf = PropagatorFamily(grid, d, head["direction"], None, blocks)
    rep = check_invariants(pf, tol)
    if not rep.passed:
        bad = ", ".join(c.name for c in rep.failures())
        raise SpecError(f"loaded family violates: {bad}")
    return pf


def save_propagator(pf: PropagatorFamily, path) -> None:
    Path(path).write_text(json.dumps(dump_propagator(pf)))


def load_propagator(path) -> PropagatorFamily:
    return load_propagator_dict(json.loads(Path(path).read_text()))

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from conftest import crandn
from parabolic import FormFamily, SourceSpec, SpectralOperator, TimeGrid, Trajectory
from parabolic import time_analysis as ta
from parabolic.errors import ContractError, DomainError, SpecError
from parabolic.heat_engine import fourier_heat_solve
from parabolic.parabolic_engine import (
    CoefficientModel,
    cauchy_step_solve,
    convergence_order,
    energy_report,
    energy_residuals,
    exact_ellipticity,
    exponential_shift_check,
    form_apply,
    kaplan_bound_constant,
    kaplan_coercivity,
    kaplan_report,
    kaplan_solve,
    max_interval_residual,
    sampled_ellipticity,
    step_maps,
    sup_norm_constant,
    v0_star_norm,
)

OP = SpectralOperator.from_eigenvalues(np.geomspace(0.5, 3.0, 5))
KINDS = ["identity", "rotation", "random_accretive"]


def family(kind, grid, op=OP, seed=0, **kw):
    return CoefficientModel(kind, op.dim, seed=seed, **kw).family(op, grid)


def test_family_validation(bounded):
    with pytest.raises(SpecError):
        FormFamily(OP, TimeGrid(0.0, 1.0, 1), np.eye(5), 1.0, 1.0)
    with pytest.raises(SpecError):
        FormFamily(OP, bounded, np.eye(4), 1.0, 1.0)
    with pytest.raises(SpecError):
        FormFamily(OP, bounded, np.eye(5), 1.0, -1.0)
    ff = FormFamily(OP, bounded, np.eye(5), 1.0, 1.0)
    assert ff.a_matrices.shape == (65, 5, 5)


def test_form_apply_examples(bounded, rng):
    ff = family("identity", bounded)
    u, v = crandn(rng, 5), crandn(rng, 5)
    s = OP.eigenvalues
    assert form_apply(ff, 3, u, v) == pytest.approx(np.vdot(s * v, s * u))
    with pytest.raises(IndexError):
        form_apply(ff, 65, u, v)


@pytest.mark.parametrize("kind", KINDS)
def test_form_adjoint_and_coercivity(kind, bounded, rng):
    ff = family(kind, bounded, seed=3)
    adj = ff.adjoint()
    for k in (0, 17, 64):
        u, v = crandn(rng, 5), crandn(rng, 5)
        assert form_apply(adj, k, v, u) == pytest.approx(np.conj(form_apply(ff, k, u, v)), abs=1e-12)
        assert form_apply(ff, k, u, u).real >= ff.nu * np.linalg.norm(OP.eigenvalues * u) ** 2 * (1 - 1e-12)


@pytest.mark.parametrize("kind", KINDS)
def test_ellipticity_checks_pass_with_declared_constants(kind, bounded):
    ff = family(kind, bounded, seed=5)
    assert sampled_ellipticity(ff).passed
    m_true, nu_true = exact_ellipticity(ff)
    assert m_true <= ff.M * (1 + 1e-12) and nu_true >= ff.nu * (1 - 1e-12)


def test_sampled_ellipticity_detects_small_M(bounded):
    ff = family("identity", bounded, M=0.5)
    rep = sampled_ellipticity(ff)
    assert not rep["boundedness"].passed and rep["coercivity"].passed


def test_shifted_family_coercivity_with_kappa(rng):
    op = SpectralOperator.from_eigenvalues([0.0, 1.0, 2.0])
    grid = TimeGrid(0.0, 1.0, 8)
    ff = family("identity", grid, op=op, lambda_shift=1.0, kappa=2.0, zeroth_scale=1.5)
    assert sampled_ellipticity(ff).passed


# ---------------------------------------------------------------- Cauchy solver


def test_cauchy_grid_rules():
    w = TimeGrid(-1.0, 1.0, 8, "full_line_window")
    with pytest.raises(ContractError):
        cauchy_step_solve(family("identity", w), np.zeros(5), None, w)
    half = TimeGrid(0.0, 4.0, 8, "half_line")
    op0 = SpectralOperator.from_eigenvalues([0.0, 1.0])
    with pytest.raises(ContractError):
        cauchy_step_solve(family("identity", half, op=op0), np.zeros(2), None, half)
    cauchy_step_solve(family("identity", half, op=op0, lambda_shift=1.0), np.zeros(2), None, half)
    with pytest.raises(ContractError):
        cauchy_step_solve(family("identity", half, kappa=1.0), np.zeros(5), None, half)


@pytest.mark.parametrize("scheme", ["implicit_euler", "crank_nicolson"])
def test_zero_data_zero_solution(scheme, bounded):
    ff = family("random_accretive", bounded)
    u = cauchy_step_solve(ff, np.zeros(5), SourceSpec.zero(OP, bounded), bounded, scheme)
    assert not np.any(u.values)
    assert not np.any(energy_residuals(ff, u, None))


def test_initial_value_is_kept_exactly(bounded, rng):
    a = crandn(rng, 5)
    u = cauchy_step_solve(family("rotation", bounded), a, None, bounded)
    assert np.array_equal(u.values[0], a)


def test_autonomous_matches_matrix_exponential(rng):
    ff_kind = "rotation"
    a = crandn(rng, 5)
    errs = []
    for n in (40, 80, 160):
        grid = TimeGrid(0.0, 1.0, n)
        ff = FormFamily(OP, grid, CoefficientModel(ff_kind, 5).build()[0](0.0), 1.0, math.cos(math.pi / 4))
        gen = ff.generators()[0]
        u = cauchy_step_solve(ff, a, None, grid)
        ref = np.array([expm(-t * gen) @ a for t in grid.times])
        errs.append(np.max(np.linalg.norm(u.values - ref, axis=1)))
    assert 1.6 <= errs[0] / errs[1] <= 2.4 and 1.6 <= errs[1] / errs[2] <= 2.4


@pytest.mark.parametrize("kind", KINDS)
def test_discrete_dissipativity(kind, bounded, rng):
    u = cauchy_step_solve(family(kind, bounded, seed=2), crandn(rng, 5), None, bounded)
    norms = u.pointwise_norms()
    assert np.all(np.diff(norms) <= 1e-13 * norms[0])


def test_forward_backward_step_maps_are_adjoint(bounded):
    ff = family("random_accretive", bounded, seed=4)
    for scheme in ("implicit_euler", "crank_nicolson"):
        p, _ = step_maps(ff, scheme)
        pb, _ = step_maps(ff, scheme, adjoint=True)
        assert np.max(np.abs(pb - np.conj(np.swapaxes(p, 1, 2)))) <= 1e-12


def test_implicit_euler_and_crank_nicolson_converge_together(rng):
    a = crandn(rng, 5)
    diffs, dts = [], []
    for n in (32, 64, 128):
        grid = TimeGrid(0.0, 1.0, n)
        ff = family("random_accretive", grid, seed=6)
        h = Trajectory.separable(OP, grid, np.cos, np.ones(5))
        src = SourceSpec(OP, grid, h1=h)
        ie = cauchy_step_solve(ff, a, src, grid, "implicit_euler")
        cn = cauchy_step_solve(ff, a, src, grid, "crank_nicolson")
        diffs.append(ta.sup_norm(ie - cn))
        dts.append(grid.dt)
    assert min(convergence_order(dts, diffs)) >= 0.9


# ---------------------------------------------------------------- energy


@pytest.mark.parametrize("kind", KINDS)
def test_energy_residual_first_order(kind, rng):
    a = crandn(rng, 5)
    res, dts = [], []
    for n in (32, 64, 128):
        grid = TimeGrid(0.0, 1.0, n)
        ff = family(kind, grid, seed=8)
        f2 = Trajectory.separable(OP, grid, lambda t: np.sin(4 * t), np.ones(5))
        h1 = Trajectory.separable(OP, grid, lambda t: 1 + t, np.ones(5) * 1j)
        src = SourceSpec(OP, grid, f2=f2, h1=h1, diracs=((0.5, a),))
        u = cauchy_step_solve(ff, a, src, grid)
        per_step = energy_residuals(ff, u, src)
        assert np.isnan(per_step).sum() == 1
        res.append(max_interval_residual(per_step))
        dts.append(grid.dt)
        assert energy_report(ff, u, src, tol_per_dt=10 * (1 + 9)).passed
    assert min(convergence_order(dts, res)) >= 0.8


def test_energy_scalar_autonomous_second_order():
    op = SpectralOperator.from_eigenvalues([1.0])
    res = []
    for n in (64, 128):
        grid = TimeGrid(0.0, 1.0, n)
        ff = FormFamily(op, grid, np.eye(1), 1.0, 1.0)
        u = Trajectory.separable(op, grid, lambda t: np.exp(-t), [1.0])  # exact solution
        res.append(max_interval_residual(energy_residuals(ff, u, None)))
    assert res[0] / res[1] == pytest.approx(4, rel=0.05)


def test_max_interval_residual_uses_all_subintervals():
    per_step = np.array([1.0, -3.0, 1.0, np.nan, 5.0])
    assert max_interval_residual(per_step) == 5.0
    assert max_interval_residual(np.array([1.0, 1.0, -0.5])) == 2.0


def test_sup_norm_constant_recorded(bounded, rng):
    a = crandn(rng, 5)
    ff = family("identity", bounded)
    u = cauchy_step_solve(ff, a, None, bounded)
    assert sup_norm_constant(u, a, None) == pytest.approx(1.0)


# ---------------------------------------------------------------- variational solver


@pytest.fixture
def wgrid():
    return TimeGrid(-8.0, 8.0, 256, "full_line_window")


def test_kaplan_requirements(wgrid, bounded):
    op0 = SpectralOperator.from_eigenvalues([0.0, 1.0])
    with pytest.raises(DomainError):
        kaplan_solve(family("identity", wgrid, op=op0), SourceSpec.zero(op0, wgrid), wgrid)
    with pytest.raises(ContractError):
        kaplan_solve(family("identity", bounded), SourceSpec.zero(OP, bounded), bounded)


def test_kaplan_zero_source(wgrid):
    u = kaplan_solve(family("rotation", wgrid), SourceSpec.zero(OP, wgrid), wgrid)
    assert not np.any(u.values)


def test_kaplan_agrees_with_fourier_for_the_heat_equation(wgrid, rng):
    f2 = Trajectory.separable(OP, wgrid, lambda t: np.exp(-(t**2)), crandn(rng, 5))
    src = SourceSpec(OP, wgrid, f2=f2)
    u = kaplan_solve(family("identity", wgrid), src, wgrid)
    ref = fourier_heat_solve(OP, src, wgrid, pad=0.0)
    assert ta.l2_norm(u - ref, 1) / ta.l2_norm(ref, 1) <= 1e-6


def test_kaplan_bound_constant_value():
    assert kaplan_bound_constant(1.0, 1.0) == pytest.approx(math.sqrt(5))


@pytest.mark.parametrize("kind", KINDS)
def test_kaplan_report_and_dual_norm(kind, wgrid, rng):
    ff = family(kind, wgrid, seed=9)
    f2 = Trajectory.separable(OP, wgrid, lambda t: np.exp(-(t**2)) * np.cos(t), crandn(rng, 5))
    h1 = Trajectory.separable(OP, wgrid, lambda t: np.exp(-((t - 1) ** 2)), crandn(rng, 5))
    src = SourceSpec(OP, wgrid, f2=f2, h1=h1)
    u = kaplan_solve(ff, src, wgrid)
    assert kaplan_report(ff, src, u).passed
    assert v0_star_norm(src) <= v0_star_norm(src, "decomposition") * (1 + 1e-12)


@given(st.integers(0, 1000), st.sampled_from(KINDS))
def test_hidden_coercivity_random(seed, kind):
    rng = np.random.default_rng(seed)
    grid = TimeGrid(-4.0, 4.0, 64, "full_line_window")
    ff = family(kind, grid, seed=seed)
    vals = crandn(rng, 65, 5)
    vals[-1] = vals[0]
    lhs, rhs = kaplan_coercivity(ff, Trajectory(grid, OP, vals))
    assert lhs >= rhs - 1e-8


# ---------------------------------------------------------------- shift


def test_exponential_shift(bounded):
    ff = family("random_accretive", bounded, seed=11)
    assert exponential_shift_check(ff, 0.7, bounded).passed
    assert exponential_shift_check(ff, 0.0, bounded).checks[0].value == 0.0
    scalar = FormFamily(SpectralOperator.from_eigenvalues([1.0]), bounded, np.eye(1), 1.0, 1.0)
    assert exponential_shift_check(scalar, 1.0, bounded).passed


def test_kappa_substitution_solves_the_original_problem(rng):
    # with kappa > 0 the solver steps e^{-kappa' t} u; the returned u must still solve du/dt + L u = 0
    op = SpectralOperator.from_eigenvalues([0.5, 1.0])
    a = crandn(rng, 2)
    errs = []
    for n in (100, 200):
        grid = TimeGrid(0.0, 1.0, n)
        ff = FormFamily(op, grid, np.eye(2), 1.0, 1.0, kappa=2.0, zeroth=-1.5 * np.eye(2))
        gen = ff.generators()[0]
        u = cauchy_step_solve(ff, a, None, grid)
        ref = np.array([expm(-t * gen) @ a for t in grid.times])
        errs.append(np.max(np.linalg.norm(u.values - ref, axis=1)))
    assert 0.4 < errs[1] / errs[0] < 0.6

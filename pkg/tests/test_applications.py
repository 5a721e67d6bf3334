import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from parabolic import SourceSpec, SpectralOperator, TimeGrid, Trajectory
from parabolic.applications import (
    DirichletSpec,
    FractionalKernelSpec,
    WeightSpec,
    a2_constant,
    degenerate_operator,
    dirichlet_form_matrix,
    dirichlet_operator,
    fractional_grid_form,
    fractional_modes,
    fractional_operator,
    random_kernel,
    simpson_weights,
    weighted_gram,
)
from parabolic.errors import ArgumentError, SpecError
from parabolic.parabolic_engine import cauchy_step_solve, convergence_order, exact_ellipticity
from parabolic.propagator import assemble_green


def one(t, x):
    return np.ones_like(x)


def test_simpson_integrates_cubics_exactly():
    w = simpson_weights(8, 0.25)
    x = np.linspace(0, 2, 9)
    assert abs(w @ x**3 - 4.0) < 1e-14


# ---------------------------------------------------------------- Dirichlet


def test_dirichlet_first_eigenvalue_on_pi():
    op, _ = dirichlet_operator(DirichletSpec(math.pi, 5, one), TimeGrid(0, 1, 4))
    assert np.allclose(op.eigenvalues, np.arange(1, 6), atol=1e-14)


def test_dirichlet_identity_coefficient_is_diagonal():
    op, ff = dirichlet_operator(DirichletSpec(2.0, 8, one), TimeGrid(0, 1, 4))
    gen = dirichlet_form_matrix(op, ff, 2)
    assert np.max(np.abs(gen - np.diag(op.eigenvalues**2))) < 1e-12


def test_dirichlet_time_scaling():
    coeff = lambda t, x: (1 + 0.5 * np.sin(t)) * np.ones_like(x)
    g = TimeGrid(0, 3, 6)
    op, ff = dirichlet_operator(DirichletSpec(1.0, 6, coeff, M=1.5, nu=0.5), g)
    for k, t in enumerate(g.times):
        expect = (1 + 0.5 * math.sin(t)) * np.eye(6)
        assert np.max(np.abs(ff.a_matrices[k] - expect)) < 1e-12


def test_dirichlet_variable_coefficient_ellipticity():
    coeff = lambda t, x: 1.0 + 0.5 * np.cos(3 * x) + 0.2j * np.sin(x)
    op, ff = dirichlet_operator(DirichletSpec(2.0, 10, coeff, M=1.6, nu=0.5), TimeGrid(0, 1, 4))
    nu, m = exact_ellipticity(ff)
    assert nu >= 0.5 - 1e-10 and m <= 1.6 + 1e-10


def test_dirichlet_ellipticity_violation_rejected():
    coeff = lambda t, x: 0.1 * np.ones_like(x)
    with pytest.raises(SpecError):
        dirichlet_operator(DirichletSpec(1.0, 4, coeff), TimeGrid(0, 1, 4))


def test_dirichlet_propagator_matches_heat_kernel_first_order():
    errs, dts = [], []
    for n in (50, 100, 200):
        g = TimeGrid(0, 0.5, n)
        op, ff = dirichlet_operator(DirichletSpec(math.pi, 4, one), g)
        blocks = np.diagonal(assemble_green(ff, g).dense(), axis1=2, axis2=3)
        lag = np.subtract.outer(g.times, g.times)[:, :, None]
        exact = np.where(lag >= 0, np.exp(-np.clip(lag, 0, None) * op.eigenvalues**2), 0.0)
        errs.append(np.max(np.abs(blocks - exact)))
        dts.append(g.dt)
    assert all(0.8 <= o <= 1.2 for o in convergence_order(dts, errs))


# ---------------------------------------------------------------- fractional kernels


def test_fractional_modes_ordering():
    assert list(fractional_modes(6)) == [1, -1, 2, -2, -3]
    assert list(fractional_modes(5)) == [1, -1, 2, -2]


def test_fractional_gamma_range():
    for gamma in (0.0, 1.0, -0.2):
        with pytest.raises(ArgumentError):
            FractionalKernelSpec(gamma, 8, lambda t, x, y: np.ones_like(x))


def test_fractional_form_annihilates_constants():
    spec = FractionalKernelSpec(0.5, 12, random_kernel(3, 0.5), lambda_ell=0.5)
    q = fractional_grid_form(spec, 0.7)
    assert np.max(np.abs(q @ np.ones(12))) < 1e-12
    assert np.max(np.abs(np.ones(12) @ q)) < 1e-12


def test_fractional_linear_in_constant_kernel():
    g = TimeGrid(0, 1, 2)
    mats = []
    for c in (0.5, 1.0):
        _, ff = fractional_operator(FractionalKernelSpec(0.5, 10, np.full((10, 10), c), lambda_ell=0.5), g)
        mats.append(ff.a_matrices[0])
    assert np.max(np.abs(mats[1] - 2 * mats[0])) < 1e-12


def test_fractional_kernel_bounds_enforced():
    with pytest.raises(SpecError):
        fractional_grid_form(FractionalKernelSpec(0.5, 8, np.full((8, 8), 2.0), lambda_ell=1.0), 0.0)


@pytest.mark.parametrize("gamma", [0.25, 0.5, 0.75])
@pytest.mark.parametrize("lam", [1.0, 0.3, 0.1])
def test_fractional_measured_coercivity(gamma, lam):
    g = TimeGrid(0, 1, 3)
    spec = FractionalKernelSpec(gamma, 16, random_kernel(7, lam), lambda_ell=lam)
    op, ff = fractional_operator(spec, g)
    assert ff.nu > 0 and ff.M >= ff.nu
    rng = np.random.default_rng(0)
    u = rng.standard_normal(op.dim) + 1j * rng.standard_normal(op.dim)
    for a in ff.a_matrices:
        val = np.vdot(u, a @ u)
        assert val.real >= ff.nu * np.vdot(u, u).real * (1 - 1e-10)
        assert abs(val) <= ff.M * np.vdot(u, u).real * (1 + 1e-10)


@given(st.integers(0, 10_000), st.floats(0.1, 1.0))
def test_random_kernel_admissible(seed, lam):
    k = random_kernel(seed, lam)
    x = np.linspace(0, 2 * math.pi, 9)
    xi, xj = np.meshgrid(x, x)
    v = k(0.3, xi, xj)
    assert np.all(v.real >= lam * (1 - 1e-12))
    assert np.all(np.abs(v) <= (1 + 1e-12) / lam)


# ---------------------------------------------------------------- weights and degenerate operators


def test_unit_weight_gives_difference_laplacian():
    spec = WeightSpec(0.0, 1.0, 16)
    op, _ = degenerate_operator(spec, TimeGrid(0, 1, 2))
    dx = spec.dx
    lap = (2 * np.eye(16) - np.eye(16, k=1) - np.eye(16, k=-1)) / dx**2
    lap[0, 0] = lap[-1, -1] = 1 / dx**2
    expect = np.sort(np.clip(np.linalg.eigvalsh(lap), 0, None))
    assert np.allclose(np.sort(op.eigenvalues**2), expect, atol=1e-9 * expect[-1])


@pytest.mark.parametrize("preset,params", [
    ("const", {"value": 2.0}),
    ("abs_power", {"power": 0.5}),
    ("exp", {"rate": 2.0}),
    ("rough_seeded", {"sigma": 1.0}),
])
def test_degenerate_basis_and_generator(preset, params):
    spec = WeightSpec(-1.0, 1.0, 32, preset, params, seed=5)
    op, ff = degenerate_operator(spec, TimeGrid(0, 1, 2))
    assert np.max(np.abs(weighted_gram(spec, op) - np.eye(32))) < 1e-10
    gen = ff.generators()[0]
    assert np.max(np.abs(gen - np.diag(op.eigenvalues**2))) < 1e-10 * np.max(op.eigenvalues**2)
    assert op.eigenvalues[0] == 0.0 and np.all(op.eigenvalues[1:] > 0)


def test_null_coordinate_evolves_by_source_only():
    spec = WeightSpec(-1.0, 1.0, 24, "abs_power", {"power": -0.5})
    g = TimeGrid(0, 1, 40)
    osc = lambda t, x, w: w * (1.2 + 0.5 * np.sin(5 * x + t))
    op, ff = degenerate_operator(spec, g, osc, nu=0.7, M=1.7)
    rng = np.random.default_rng(2)
    a = rng.standard_normal(24)
    h = rng.standard_normal(24)
    src = SourceSpec(op, g, h1=Trajectory.separable(op, g, np.ones_like, h))
    u = cauchy_step_solve(ff, a, src, g)
    assert np.max(np.abs(u.values[:, 0] - (a[0] + g.times * h[0]))) < 1e-13


def test_degenerate_rejects_bad_weight_and_coefficient():
    with pytest.raises(SpecError):
        degenerate_operator(WeightSpec(0, 1, 4, samples=(1.0, 0.0, 1.0, 1.0)), TimeGrid(0, 1, 2))
    with pytest.raises(SpecError):
        degenerate_operator(WeightSpec(0, 1, 4), TimeGrid(0, 1, 2), lambda t, x, w: 0.1 * w)


def test_a2_constant_oracles():
    assert abs(a2_constant(WeightSpec(0, 1, 64, "const", {"value": 3.0}), 10) - 1.0) < 1e-12
    exp_spec = WeightSpec(0, 1, 64, "exp", {"rate": 1.0})
    assert abs(a2_constant(exp_spec, 0) - (2 * math.cosh(1) - 2)) < 1e-10
    spec = WeightSpec(-1, 1, 1024, "abs_power", {"power": 0.5})
    assert abs(a2_constant(spec, 0) - 4 / 3) < 1e-12
    c8, c10 = a2_constant(spec, 8), a2_constant(spec, 10)
    assert abs(c10 - c8) <= 0.02 * c8
    assert c10 >= 4 / 3


@given(st.floats(-0.9, 0.9))
def test_a2_constant_at_least_one(power):
    spec = WeightSpec(-1, 1, 64, "abs_power", {"power": power, "center": 0.1})
    assert a2_constant(spec, 6) >= 1 - 1e-12

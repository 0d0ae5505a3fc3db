import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from pwmstab.errors import (
    BracketError,
    ConvergenceError,
    DimensionError,
    NumericError,
    SingularJacobianError,
)
from pwmstab.numerics import (
    affine_flow,
    bisect,
    determinant,
    eigenvalues,
    matexp,
    newton_solve,
    spectral_radius,
)


def taylor_expm(A, t, terms=30):
    out = np.eye(A.shape[0])
    term = np.eye(A.shape[0])
    for k in range(1, terms):
        term = term @ (A * t) / k
        out = out + term
    return out


finite = st.floats(min_value=-3.0, max_value=3.0, allow_nan=False)
matrices2 = st.lists(finite, min_size=4, max_size=4).map(lambda v: np.array(v).reshape(2, 2))


def test_matexp_zero_is_identity():
    assert np.array_equal(matexp(np.zeros((2, 2)), 1.0), np.eye(2))


def test_matexp_diagonal():
    a, b, t = -3.0, 0.7, 1.3
    E = matexp(np.diag([a, b]), t)
    assert np.allclose(E, np.diag([math.exp(a * t), math.exp(b * t)]), rtol=1e-14, atol=0)


def test_matexp_matches_taylor_series(rng):
    for _ in range(20):
        A = rng.normal(size=(2, 2))
        assert np.max(np.abs(matexp(A, 0.5) - taylor_expm(A, 0.5))) < 1e-12


def test_matexp_needs_squaring():
    # large norm: exercises many squarings; checked against the eigen decomposition
    A = np.array([[-2.0e5, -2.0e4], [1.0e5, -5.0e3]])
    w, V = np.linalg.eig(A)
    ref = (V @ np.diag(np.exp(w * 1e-4)) @ np.linalg.inv(V)).real
    assert np.allclose(matexp(A, 1e-4), ref, rtol=1e-11, atol=1e-14)


@settings(max_examples=60, deadline=None)
@given(matrices2, st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_matexp_semigroup(A, s, t):
    lhs = matexp(A, s + t)
    rhs = matexp(A, s) @ matexp(A, t)
    assert np.max(np.abs(lhs - rhs)) <= 1e-9 * max(1.0, np.max(np.abs(lhs)))


@settings(max_examples=60, deadline=None)
@given(matrices2, st.floats(0.0, 1.0))
def test_det_of_matexp_is_exp_trace(A, t):
    assert determinant(matexp(A, t)) == pytest.approx(math.exp(np.trace(A) * t), rel=1e-10)


def test_matexp_errors():
    with pytest.raises(DimensionError):
        matexp(np.zeros((2, 3)))
    with pytest.raises(NumericError):
        matexp(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_affine_flow_pure_integrator():
    u = np.array([2.0, -1.0])
    res = affine_flow(np.zeros((2, 2)), np.eye(2), u, 0.3)
    assert np.allclose(res.transition, np.eye(2))
    assert np.allclose(res.forced, u * 0.3, rtol=1e-15)


def test_affine_flow_zero_time():
    res = affine_flow(np.array([[1.0, 2.0], [3.0, 4.0]]), np.eye(2), [1.0, 1.0], 0.0)
    assert np.array_equal(res.transition, np.eye(2))
    assert np.array_equal(res.forced, np.zeros(2))


def test_affine_flow_buck_on_stage_matches_rk(buck):
    model, _, _ = buck
    A, B, u = model.A1, model.B1, model.u
    T = model.period
    x0 = np.array([1.5, 4.0])
    res = affine_flow(A, B, u, T / 2)
    sol = solve_ivp(
        lambda t, x: A @ x + B @ u, (0.0, T / 2), x0, method="DOP853", rtol=1e-13, atol=1e-14
    )
    assert np.allclose(res.apply(x0), sol.y[:, -1], rtol=1e-9, atol=0)


def test_affine_flow_errors():
    with pytest.raises(DimensionError):
        affine_flow(np.zeros((2, 2)), np.ones((3, 1)), [1.0], 1.0)
    with pytest.raises(NumericError):
        affine_flow(np.zeros((2, 2)), np.ones((2, 1)), [1.0], -1.0)


def test_eigenvalues_examples():
    assert eigenvalues(np.eye(2)) == [1, 1]
    vals = eigenvalues(np.array([[0.0, 1.0], [-1.0, 0.0]]))
    assert sorted(vals, key=lambda z: z.imag) == [-1j, 1j]
    assert eigenvalues(np.array([[3.0]])) == [3.0]


def test_eigenvalues_sorted_by_modulus():
    vals = eigenvalues(np.diag([0.2, -0.9]))
    assert vals == [-0.9, 0.2]


def test_eigenvalues_larger_matrices(rng):
    for n in (3, 4):
        M = rng.normal(size=(n, n))
        vals = eigenvalues(M)
        assert np.prod(vals) == pytest.approx(np.linalg.det(M), rel=1e-10)
    with pytest.raises(DimensionError):
        eigenvalues(np.eye(5))
    with pytest.raises(DimensionError):
        eigenvalues(np.ones((2, 3)))


@settings(max_examples=100, deadline=None)
@given(matrices2)
def test_eigenvalue_product_and_sum(M):
    vals = eigenvalues(M)
    scale = 1.0 + np.max(np.abs(M)) ** 2
    assert abs(np.prod(vals) - determinant(M)) <= 1e-12 * scale
    assert abs(sum(vals) - np.trace(M)) <= 1e-12 * scale


def test_eigenvalues_of_buck_jacobian(buck):
    from pwmstab.stability import compute_jacobian

    phi = compute_jacobian(buck[2], buck[0], buck[1])
    assert abs(np.prod(eigenvalues(phi)) - determinant(phi)) < 1e-10


def test_determinant_examples():
    assert determinant(np.eye(2)) == 1.0
    assert determinant(np.diag([2.0, 3.0])) == pytest.approx(6.0, rel=1e-15)
    with pytest.raises(DimensionError):
        determinant(np.ones((1, 2)))


def test_determinant_of_stage_product(buck):
    model = buck[0]
    T, d = model.period, 0.37 * model.period
    M = matexp(model.A1, d) @ matexp(model.A2, T - d)
    expected = math.exp(np.trace(model.A1) * d + np.trace(model.A2) * (T - d))
    assert determinant(M) == pytest.approx(expected, rel=1e-10)


def test_spectral_radius():
    assert spectral_radius(np.diag([0.5, -0.7])) == pytest.approx(0.7)


def test_newton_affine_residual():
    c = np.array([1.0, -2.0, 3.5])
    x = newton_solve(lambda x: x - c, np.zeros(3))
    assert np.allclose(x, c, atol=1e-12)


def test_newton_scalar():
    x = newton_solve(lambda x: x**2 - 4.0, [3.0], tol=1e-12)
    assert x[0] == pytest.approx(2.0, abs=1e-12)


def test_newton_failures():
    with pytest.raises(SingularJacobianError):
        newton_solve(lambda x: np.array([x[0] + x[1] - 1.0, 2 * x[0] + 2 * x[1]]), [0.0, 0.0])
    with pytest.raises(ConvergenceError):
        newton_solve(lambda x: x**2 + 1.0, [0.5])
    with pytest.raises(ConvergenceError):
        newton_solve(lambda x: x**3 - 8.0, [100.0], max_iter=2)


def test_bisect_examples():
    assert bisect(lambda x: x - 0.5, 0.0, 1.0) == pytest.approx(0.5, abs=1e-12)
    assert bisect(math.cos, 1.0, 2.0) == pytest.approx(math.pi / 2, abs=1e-12)
    with pytest.raises(BracketError):
        bisect(lambda x: x * x + 1.0, -1.0, 1.0)


def test_bisect_spectral_boundary_matches_grid_scan():
    from pwmstab.corpus import corpus_case
    from pwmstab.orbit import find_periodic_orbit
    from pwmstab.stability import compute_jacobian

    model, rule = corpus_case("buck-ideal-highduty")

    def excess(m_c):
        r = rule.replace(ramp_slope=m_c)
        orbit = find_periodic_orbit(model, r)
        return spectral_radius(compute_jacobian(orbit, model, r)) - 1.0

    grid = np.linspace(0.0, 5e4, 51)
    signs = np.sign([excess(v) for v in grid])
    k = int(np.flatnonzero(signs[:-1] != signs[1:])[0])
    boundary = bisect(excess, 0.0, 5e4, tol=1e-6)
    assert grid[k] <= boundary <= grid[k + 1]

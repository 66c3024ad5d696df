import numpy as np
import pytest

from fredpert.exceptions import CharacteristicValueError
from fredpert.linear_solver import (
    eigendecompose,
    nystrom_interpolate,
    singular_solve,
    solve_fredholm2,
    spectral_resolvent_solve,
)
from fredpert.operators import GridFunction, apply_kernel, discretize_kernel, kernel_norms
from fredpert.quadrature import build_rule

R = build_rule("gauss", 32)
X = R.nodes
COS = "cos(pi*x)*cos(pi*y)"


def gf(values):
    return GridFunction(R, values)


def residual(K, omega, f, phi):
    return np.max(np.abs(phi.values - omega * apply_kernel(K, phi).values - f.values))


def test_separable_solution():
    K = discretize_kernel("x*y", R)
    f = gf(X)
    phi = solve_fredholm2(K, 0.5, f)
    np.testing.assert_allclose(phi.values, 1.2 * X, atol=1e-14)
    assert residual(K, 0.5, f, phi) <= 1e-10 * (1 + f.norm_sup())


def test_zero_omega_returns_forcing():
    K = discretize_kernel("exp(x*y)", R)
    f = gf(np.sin(X))
    assert solve_fredholm2(K, 0.0, f) is f


def test_characteristic_value_is_reported():
    K = discretize_kernel(COS, R)
    with pytest.raises(CharacteristicValueError, match="characteristic value"):
        solve_fredholm2(K, 2.0, gf(np.cos(np.pi * X)))


def test_nystrom_interpolation_off_grid():
    K = discretize_kernel("x*y", R)
    phi = solve_fredholm2(K, 0.5, gf(X))
    t = np.linspace(0, 1, 11)
    np.testing.assert_allclose(nystrom_interpolate(K, 0.5, "x", phi, t), 1.2 * t, atol=1e-14)
    np.testing.assert_allclose(nystrom_interpolate(K, 0.5, lambda s: s, phi, t), 1.2 * t, atol=1e-14)


@pytest.mark.parametrize("kernel,mu,phi1", [
    (COS, 0.5, lambda x: np.sqrt(2) * np.cos(np.pi * x)),
    ("x*y", 1 / 3, lambda x: np.sqrt(3) * x),
])
def test_rank_one_eigensystems(kernel, mu, phi1):
    es = eigendecompose(discretize_kernel(kernel, R))
    assert es.eigenvalues[0] == pytest.approx(mu, abs=1e-13)
    np.testing.assert_allclose(es.eigenfunction(0).values, phi1(X), atol=1e-12)
    assert np.max(np.abs(es.eigenvalues[1:])) <= 1e-13


def test_zero_kernel_eigenvalues():
    es = eigendecompose(discretize_kernel("0", R))
    assert np.all(es.eigenvalues == 0)


@pytest.mark.parametrize("kernel", ["exp(-(x-y)^2)", "cos(x+y)", "x*y + 1", "sin(pi*x)*sin(pi*y) + x*y"])
def test_eigensystem_invariants(kernel):
    K = discretize_kernel(kernel, R)
    es = eigendecompose(K)
    V = es.vectors
    gram = V.T @ (R.weights[:, None] * V)
    np.testing.assert_allclose(gram, np.eye(R.n), atol=1e-10)
    assert np.all(np.diff(np.abs(es.eigenvalues)) <= 1e-15)
    for j in range(4):
        phi = es.eigenfunction(j)
        assert np.max(np.abs(apply_kernel(K, phi).values - es.eigenvalues[j] * phi.values)) <= 1e-8


def test_asymmetric_kernel_rejected():
    with pytest.raises(ValueError):
        eigendecompose(discretize_kernel("x - y^2", R))


def test_spectral_solve_examples():
    es = eigendecompose(discretize_kernel(COS, R))
    f = gf(np.cos(np.pi * X))
    np.testing.assert_allclose(spectral_resolvent_solve(es, 1.0, f).values, 2 * f.values, atol=1e-12)
    g = gf(np.cos(2 * np.pi * X))  # orthogonal to the only active mode
    np.testing.assert_allclose(spectral_resolvent_solve(es, 1.0, g).values, g.values, atol=1e-12)
    np.testing.assert_allclose(spectral_resolvent_solve(es, 0.0, f).values, f.values, atol=1e-15)


def test_spectral_solve_reports_skipped_resonant_modes():
    es = eigendecompose(discretize_kernel(COS, R))
    phi, skipped = spectral_resolvent_solve(es, 2.0, gf(np.cos(2 * np.pi * X)), report=True)
    assert skipped == [0]
    np.testing.assert_allclose(phi.values, np.cos(2 * np.pi * X), atol=1e-12)


@pytest.mark.parametrize("kernel,omega", [("exp(-(x-y)^2)", 0.7), ("cos(x+y)", -1.3), ("x*y + 1", 0.4)])
def test_spectral_and_nystrom_agree(kernel, omega, rng):
    K = discretize_kernel(kernel, R)
    es = eigendecompose(K)
    f = gf(np.exp(X) + rng.normal(size=R.n) * 0.1)
    a = spectral_resolvent_solve(es, omega, f)
    b = solve_fredholm2(K, omega, f)
    assert np.max(np.abs(a.values - b.values)) <= 1e-8


def test_singular_solve_examples():
    K = discretize_kernel(COS, R)
    res = singular_solve(K, 2.0, gf(np.cos(2 * np.pi * X)))
    assert res.solvable and res.nullity == 1
    np.testing.assert_allclose(res.solution.values, np.cos(2 * np.pi * X), atol=1e-10)
    res = singular_solve(K, 2.0, gf(np.cos(np.pi * X)))
    assert not res.solvable
    assert res.nullspace_residual == pytest.approx(np.sqrt(0.5), rel=1e-10)


def test_singular_solve_minimal_norm_has_no_null_component():
    K = discretize_kernel(COS, R)
    f = gf(X - 0.5)  # odd about 1/2, hence orthogonal to cos(pi x) ... up to rounding
    f = gf(f.values - f.inner(gf(np.cos(np.pi * X))) / 0.5 * np.cos(np.pi * X))
    res = singular_solve(K, 2.0, f)
    assert res.solvable
    assert abs(res.solution.inner(gf(np.cos(np.pi * X)))) <= 1e-12
    assert residual(K, 2.0, f, res.solution) <= 1e-10


def test_singular_solve_agrees_with_nonsingular_solve():
    K = discretize_kernel("exp(-(x-y)^2)", R)
    f = gf(np.cos(X))
    res = singular_solve(K, 0.5, f)
    assert res.solvable and res.nullity == 0
    np.testing.assert_allclose(res.solution.values, solve_fredholm2(K, 0.5, f).values, atol=1e-10)


@pytest.mark.parametrize("kernel", ["exp(-(x-y)^2)", "x - y", "sin(3*x*y)"])
def test_neumann_bound(kernel, rng):
    K = discretize_kernel(kernel, R)
    N = kernel_norms(K).N_inf
    omega = 0.9 / N
    for _ in range(100):
        f = gf(rng.normal(size=R.n))
        phi = solve_fredholm2(K, omega, f)
        assert phi.norm_sup() <= f.norm_sup() / (1 - omega * N) * (1 + 1e-12)

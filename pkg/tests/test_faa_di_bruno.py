import itertools
import math

import numpy as np
import pytest
from numpy.polynomial import polynomial as P
from hypothesis import given, settings, strategies as st

from fredpert.faa_di_bruno import (
    CoeffSeries,
    PowerTable,
    TaylorCoefficients,
    bell_partial,
    cauchy_product,
    compose_series,
    count_E,
    p_nu,
    pair_tuples,
)
from fredpert.operators import GridFunction
from fredpert.quadrature import build_rule


# --- brute-force oracles ---------------------------------------------------

def set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def brute_E(n, k):
    # walk every (r, s) choice for each of the k slots, pruning overshoots
    def rec(remaining, slots):
        if slots == 0:
            return 1 if remaining == 0 else 0
        return sum(rec(remaining - r * s, slots - 1)
                   for r in range(1, remaining + 1)
                   for s in range(1, remaining // r + 1))
    return rec(n, k)


def brute_bell_partial(n, k, x):
    total = 0.0
    for part in set_partitions(list(range(n))):
        if len(part) == k:
            total += math.prod(x[len(b) - 1] for b in part)
    return total


# --- series arithmetic -----------------------------------------------------

def test_cauchy_product_examples():
    a = CoeffSeries([1.0, 1.0, 0.0])
    b = CoeffSeries([1.0, -1.0, 0.0])
    np.testing.assert_array_equal(cauchy_product(a, b).coeffs, [1, 0, -1])
    a0, a1 = 2.0, 3.0
    sq = CoeffSeries([a0, a1, 0.0]) * CoeffSeries([a0, a1, 0.0])
    np.testing.assert_array_equal(sq.coeffs, [a0 * a0, 2 * a0 * a1, a1 * a1])


def test_grid_series_product_is_pointwise():
    r = build_rule("gauss", 4)
    x = r.nodes
    a = CoeffSeries(np.array([x, 2 * x]), r)
    b = CoeffSeries(np.array([np.ones(4), np.ones(4)]), r)
    np.testing.assert_allclose((a * b).coeffs, [x, 3 * x])


def test_mismatched_orders_rejected():
    with pytest.raises(ValueError):
        cauchy_product(CoeffSeries([1.0, 2.0]), CoeffSeries([1.0, 2.0, 3.0]))


COEFFS = st.lists(st.floats(-2, 2), min_size=6, max_size=6)


@settings(max_examples=60, deadline=None)
@given(a=COEFFS, b=COEFFS, c=COEFFS)
def test_product_commutes_and_associates(a, b, c):
    A, B, C = CoeffSeries(a), CoeffSeries(b), CoeffSeries(c)
    np.testing.assert_allclose((A * B).coeffs, (B * A).coeffs, atol=1e-13)
    np.testing.assert_allclose(((A * B) * C).coeffs, (A * (B * C)).coeffs, atol=1e-13)


def test_horner_evaluation():
    s = CoeffSeries([1.0, 2.0, 3.0])
    assert s(0.5) == pytest.approx(1 + 1 + 0.75)


# --- composition -----------------------------------------------------------

def test_compose_square():
    a0, a1, a2 = 1.5, -0.5, 2.0
    u = compose_series("z^2", a0, CoeffSeries([0.0, a1, a2]))
    np.testing.assert_allclose(u.coeffs, [a0**2, 2 * a0 * a1, a1**2 + 2 * a0 * a2])


def test_compose_identity_and_exp():
    d = CoeffSeries([0.0, 0.3, -0.2, 0.7])
    np.testing.assert_allclose(compose_series("z", 1.1, d).coeffs, [1.1, 0.3, -0.2, 0.7])
    u = compose_series("exp(z)", 0.0, CoeffSeries([0.0, 1.0, 0.0, 0.0, 0.0, 0.0]))
    np.testing.assert_allclose(u.coeffs, [1 / math.factorial(k) for k in range(6)], atol=1e-15)


def test_compose_requires_zero_constant_term():
    with pytest.raises(ValueError):
        compose_series("z", 0.0, CoeffSeries([1.0, 1.0]))


def test_compose_on_grid_uses_nodes_for_y():
    r = build_rule("gauss", 5)
    base = GridFunction(r, r.nodes)
    d = CoeffSeries(np.array([np.zeros(5), np.ones(5), np.zeros(5)]), r)
    u = compose_series("y*z^2", base, d)
    y = r.nodes
    np.testing.assert_allclose(u.coeffs, [y**3, 2 * y**2, y])


@pytest.mark.parametrize("degree", range(1, 6))
def test_compose_matches_polynomial_expansion(degree):
    rng = np.random.default_rng(degree)
    N = 8
    pc = [int(v) for v in rng.integers(-3, 4, degree + 1)]
    dc = [0] + [int(v) for v in rng.integers(-3, 4, 4)]
    base = 0.75
    psi_text = " + ".join(f"({c})*z^{k}" for k, c in enumerate(pc))
    delta = CoeffSeries(np.array(dc + [0] * (N + 1 - len(dc)), dtype=float))
    u = compose_series(psi_text, base, delta, N)
    # expand psi(base + delta(eps)) as a polynomial in eps
    inner = P.polyadd([base], dc)
    expanded = np.zeros(1)
    for k, c in enumerate(pc):
        expanded = P.polyadd(expanded, c * P.polypow(inner, k))
    exact = np.zeros(N + 1)
    exact[: min(N + 1, expanded.size)] = expanded[: N + 1]
    np.testing.assert_allclose(u.coeffs, exact, atol=1e-12 * max(1.0, np.max(np.abs(exact))))


def test_compose_matches_finite_differences():
    # Richardson-extrapolated one-sided differences of psi(base + delta(eps))
    psi = lambda s: np.sin(s) * np.exp(0.5 * s)  # noqa: E731
    base = 0.4
    dc = [0.0, 0.8, -0.3, 0.5, 0.1]
    u = compose_series("sin(z)*exp(0.5*z)", base, CoeffSeries(dc))
    g = lambda e: psi(base + sum(c * e**k for k, c in enumerate(dc)))  # noqa: E731

    def fd(k, h):
        vals = [g(i * h) for i in range(k + 1)]
        diff = sum((-1) ** (k - i) * math.comb(k, i) * v for i, v in enumerate(vals))
        return diff / (h**k * math.factorial(k))

    for k in range(1, 5):
        h = 0.02
        table = [fd(k, h / 2**i) for i in range(4)]
        for m in range(1, 4):
            table = [(2**m * b - a) / (2**m - 1) for a, b in zip(table, table[1:])]
        assert abs(table[0] - u.coeffs[k]) <= 1e-5 * max(1.0, abs(u.coeffs[k]))


def test_taylor_coefficients_vanish_for_polynomials():
    t = TaylorCoefficients("z^3", np.array([2.0]))
    np.testing.assert_allclose([t[m][0] for m in range(5)], [8, 12, 6, 1, 0])
    assert t.vanishes_from(4) and not t.vanishes_from(3)


def test_power_table_requires_sequential_orders():
    pt = PowerTable(())
    with pytest.raises(ValueError):
        pt.nonlinear_part(2, TaylorCoefficients("z^2", 0.0))


# --- combinatorics ---------------------------------------------------------

def test_bell_partial_examples():
    assert bell_partial(3, 2, [1, 1]) == 3
    assert bell_partial(3, 2, [1, 1]) == brute_bell_partial(3, 2, [1, 1])
    xs = [0.3, -1.2, 2.5, 0.7, 1.1]
    for n in range(1, 6):
        assert bell_partial(n, 1, xs) == pytest.approx(xs[n - 1])
        assert bell_partial(n, n, [xs[0]]) == pytest.approx(xs[0] ** n)


def test_bell_partial_matches_set_partitions():
    xs = [0.5, -1.0, 2.0, 0.25, 1.5, -0.75]
    for n in range(1, 7):
        for k in range(1, n + 1):
            assert bell_partial(n, k, xs) == pytest.approx(brute_bell_partial(n, k, xs), abs=1e-12)


@pytest.mark.parametrize("n", range(1, 11))
def test_bell_row_sums_are_bell_numbers(n):
    bell = sum(1 for _ in set_partitions(list(range(n))))
    assert sum(bell_partial(n, k, [1.0] * n) for k in range(1, n + 1)) == bell


def test_bell_partial_index_errors():
    with pytest.raises(ValueError):
        bell_partial(2, 3, [1, 1])
    with pytest.raises(ValueError):
        bell_partial(4, 2, [1, 1])


def test_count_E_examples():
    assert count_E(1, 1) == 1
    assert count_E(2, 1) == 2
    assert all(count_E(n, n) == 1 for n in range(1, 20))


@pytest.mark.parametrize("n", range(1, 9))
def test_count_E_vanishes_beyond_n(n):
    for k in range(n + 1, 9):
        assert count_E(n, k) == 0


def test_count_E_matches_brute_force_full_grid():
    for n in range(1, 9):
        for k in range(1, 9):
            assert count_E(n, k) == brute_E(n, k)


def test_count_E_within_binomial_bound():
    for n in range(1, 13):
        assert count_E(n, n) <= math.comb(2 * n - 1, n - 1)


def test_pair_tuples_cover_all_solutions():
    for total in range(1, 7):
        tuples = list(pair_tuples(total, total))
        assert len(tuples) == sum(count_E(total, k) for k in range(1, total + 1))
        assert all(sum(r * s for r, s in t) == total for t in tuples)


def test_p_nu_examples():
    r = build_rule("gauss", 4)
    terms = [GridFunction(r, r.nodes + k) for k in range(5)]
    np.testing.assert_allclose(p_nu(terms, 2).values, terms[1].values)
    zeros = [terms[0]] + [GridFunction.zeros(r)] * 4
    for nu in range(2, 6):
        assert np.all(p_nu(zeros, nu).values == 0)


def test_p_nu_three_against_enumeration():
    phi = [1.0, 2.0, 3.0]
    total = 0.0
    for r1, s1 in itertools.product(range(1, 3), repeat=2):
        if r1 * s1 == 2:
            total += math.factorial(2) / math.factorial(s1) ** r1 * phi[s1] ** r1
    for (r1, s1), (r2, s2) in itertools.product(itertools.product(range(1, 3), repeat=2), repeat=2):
        if r1 * s1 + r2 * s2 == 2:
            total += 2 / (math.factorial(s1) ** r1 * math.factorial(s2) ** r2) * phi[s1] ** r1 * phi[s2] ** r2
    assert p_nu(phi, 3) == pytest.approx(total)
    assert p_nu(phi, 3) == pytest.approx(19.0)

"""Truncated power series in the perturbation parameter and their composition.

Coefficients are stored as rows of an array: ``coeffs[k]`` is the
coefficient of ``eps**k`` and may be a scalar or a vector of grid values.
Composition ``psi(y, base + delta(eps))`` uses the Taylor expansion of
``psi`` in its second argument together with powers of ``delta``; this is
the production path of the series engine.

Also here: partial exponential Bell polynomials, the count ``E(n, k)`` of
positive solutions of ``sum r_j s_j = n``, and a literal ``P_nu`` sum kept
for inspection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from . import expr as ex
from .operators import GridFunction
from .quadrature import QuadratureRule


@dataclass(frozen=True, eq=False)
class CoeffSeries:
    """Truncated series ``sum_k coeffs[k] eps**k``, ``k = 0..order``."""

    coeffs: np.ndarray
    rule: Optional[QuadratureRule] = None

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim == 0:
            c = c[None]
        if self.rule is not None and c.shape[1:] != (self.rule.n,):
            raise ValueError("coefficient rows must match the rule's node count")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_grid_functions(cls, terms):
        terms = list(terms)
        rule = terms[0].rule
        return cls(np.array([t.values for t in terms]), rule)

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    def __len__(self):
        return self.coeffs.shape[0]

    def __getitem__(self, k):
        return self.coeffs[k]

    def grid_function(self, k) -> GridFunction:
        return GridFunction(self.rule, self.coeffs[k])

    def _check(self, other):
        if self.order != other.order:
            raise ValueError(f"order mismatch: {self.order} vs {other.order}")
        if self.rule is not None and other.rule is not None and not self.rule.same_as(other.rule):
            raise ValueError("rule mismatch")

    def __add__(self, other):
        self._check(other)
        return CoeffSeries(self.coeffs + other.coeffs, self.rule or other.rule)

    def __sub__(self, other):
        self._check(other)
        return CoeffSeries(self.coeffs - other.coeffs, self.rule or other.rule)

    def __mul__(self, other):
        if isinstance(other, CoeffSeries):
            return cauchy_product(self, other)
        return CoeffSeries(self.coeffs * other, self.rule)

    __rmul__ = __mul__

    def __call__(self, eps):
        """Horner evaluation at ``eps``."""
        out = np.zeros_like(self.coeffs[0])
        for c in self.coeffs[::-1]:
            out = out * eps + c
        return out


def cauchy_product(a: CoeffSeries, b: CoeffSeries) -> CoeffSeries:
    """Truncated product: ``c_k = sum_{i+j=k} a_i b_j`` (pointwise on grids)."""
    a._check(b)
    N = a.order
    A, B = a.coeffs, b.coeffs
    C = np.zeros(np.broadcast_shapes(A.shape, B.shape))
    for k in range(N + 1):
        C[k] = np.sum(A[: k + 1] * B[k::-1], axis=0)
    return CoeffSeries(C, a.rule or b.rule)


class TaylorCoefficients:
    """Lazily computed ``d^m psi/dz^m (y, base) / m!`` for ``m = 0, 1, ...``.

    Symbolic derivatives come from :func:`expr.differentiate`; once a
    derivative folds to the literal ``0`` all higher ones are zero.
    """

    def __init__(self, psi, base, y=0.0):
        self.psi = ex.parse(psi)
        extra = ex.free_variables(self.psi) - {"y", "z"}
        if extra:
            raise ex.EvaluationError(f"nonlinearity may only use y and z, found {sorted(extra)}")
        self.base = np.asarray(base, dtype=float)
        self.y = y
        self._derivs = [self.psi]
        self._values = []
        self._vanish_from = None

    def _derivative(self, m):
        while len(self._derivs) <= m:
            self._derivs.append(ex.differentiate(self._derivs[-1], "z"))
        return self._derivs[m]

    def __getitem__(self, m):
        while len(self._values) <= m:
            k = len(self._values)
            if self._vanish_from is not None and k >= self._vanish_from:
                self._values.append(np.zeros_like(self.base))
                continue
            d = self._derivative(k)
            if isinstance(d, ex.Num) and d.value == 0:
                self._vanish_from = k
                self._values.append(np.zeros_like(self.base))
                continue
            val = ex.evaluate(d, {"y": self.y, "z": self.base}) / math.factorial(k)
            self._values.append(np.broadcast_to(val, self.base.shape).astype(float))
        return self._values[m]

    def vanishes_from(self, m) -> bool:
        """True when every coefficient of index >= m is known to be zero."""
        self[m]
        return self._vanish_from is not None and m >= self._vanish_from


class PowerTable:
    """Incremental powers of ``delta(eps) = sum_{k>=1} d_k eps^k``.

    ``table[m][k]`` is the ``eps^k`` coefficient of ``delta^m``.  Entries with
    ``m >= 2`` at order ``k`` only involve ``d_1..d_{k-1}``, so they are
    available before ``d_k`` is known; that is what lets the series engine
    isolate the part of order ``k`` that is linear in the unknown.
    """

    def __init__(self, shape=()):
        self.shape = shape
        self.d = [None]  # d[0] unused: delta has no constant term
        self.table = {1: {}}

    @property
    def order(self):
        return len(self.d) - 1

    def nonlinear_part(self, k, taylor: TaylorCoefficients):
        """``sum_{m>=2} t_m [delta^m]_k`` using ``d_1..d_{k-1}``."""
        if k != self.order + 1:
            raise ValueError("orders must be pushed in sequence")
        out = np.zeros(self.shape)
        for m in range(2, k + 1):
            if taylor.vanishes_from(m):
                break
            prev = self.table[m - 1]
            acc = np.zeros(self.shape)
            for i in range(1, k - m + 2):
                acc = acc + self.d[i] * prev[k - i]
            self.table.setdefault(m, {})[k] = acc
            out = out + taylor[m] * acc
        return out

    def push(self, dk):
        k = self.order + 1
        dk = np.broadcast_to(np.asarray(dk, dtype=float), self.shape)
        self.d.append(dk)
        self.table[1][k] = dk


def compose_series(psi, base, delta: CoeffSeries, N: Optional[int] = None,
                   y=None) -> CoeffSeries:
    """Coefficients of ``psi(y, base + delta(eps))`` up to order ``N``.

    ``u_0 = psi(y, base)`` and ``u_k = sum_{m=1..k} psi^(m)(y, base)/m! *
    [delta^m]_k``.  ``base`` may be a :class:`GridFunction` (then ``y``
    defaults to its nodes) or an array/scalar.
    """
    N = delta.order if N is None else N
    if delta.order < N:
        raise ValueError("delta series is shorter than the requested order")
    if np.any(np.asarray(delta.coeffs[0]) != 0):
        raise ValueError("delta must have zero constant term")
    rule = delta.rule
    if isinstance(base, GridFunction):
        rule = base.rule
        y = base.nodes if y is None else y
        base = base.values
    y = 0.0 if y is None else y
    base = np.asarray(base, dtype=float)
    shape = np.broadcast_shapes(base.shape, np.shape(delta.coeffs[0]))
    base = np.broadcast_to(base, shape)
    taylor = TaylorCoefficients(psi, base, y)
    powers = PowerTable(shape)
    out = [np.array(taylor[0], dtype=float)]
    for k in range(1, N + 1):
        nonlin = powers.nonlinear_part(k, taylor)
        powers.push(delta.coeffs[k])
        out.append(nonlin + taylor[1] * powers.d[k])
    return CoeffSeries(np.array(out), rule)


# ----------------------------------------------------------------------------
# combinatorics

def bell_partial(n: int, k: int, args) -> float:
    """Partial exponential Bell polynomial ``B_{n,k}(x_1, ..., x_{n-k+1})``.

    Uses ``B_{n,k} = sum_i C(n-1, i-1) x_i B_{n-i,k-1}`` with
    ``B_{0,0} = 1``.
    """
    if not (1 <= k <= n):
        raise ValueError(f"need 1 <= k <= n, got n={n}, k={k}")
    x = [float(a) for a in args]
    if len(x) < n - k + 1:
        raise ValueError(f"need at least {n - k + 1} arguments")

    @lru_cache(maxsize=None)
    def B(nn, kk):
        if nn == 0 and kk == 0:
            return 1.0
        if nn == 0 or kk == 0:
            return 0.0
        return sum(
            math.comb(nn - 1, i - 1) * x[i - 1] * B(nn - i, kk - 1)
            for i in range(1, nn - kk + 2)
        )

    return B(n, k)


def _divisor_count(m):
    return sum(1 for r in range(1, m + 1) if m % r == 0)


@lru_cache(maxsize=None)
def count_E(n: int, k: int) -> int:
    """Number of tuples ``(r_1, s_1, ..., r_k, s_k)`` of positive integers
    with ``sum_j r_j s_j = n``.

    Each part ``m = r_j s_j`` admits ``d(m)`` factorizations, so
    ``E(n, k) = sum_m d(m) E(n - m, k - 1)``.
    """
    if n < 0 or k < 0:
        raise ValueError("n and k must be non-negative")
    if k == 0:
        return 1 if n == 0 else 0
    return sum(_divisor_count(m) * count_E(n - m, k - 1) for m in range(1, n - k + 2))


def pair_tuples(total: int, max_pairs: int):
    """Ordered tuples of 1..max_pairs positive pairs ``(r, s)`` with
    ``sum r*s == total``."""

    def rec(remaining, left):
        if remaining == 0:
            yield ()
            return
        if left == 0:
            return
        for m in range(1, remaining + 1):
            for r in range(1, m + 1):
                if m % r == 0:
                    for rest in rec(remaining - m, left - 1):
                        yield ((r, m // r),) + rest

    yield from (t for t in rec(total, max_pairs) if t)


def p_nu(terms, nu: int):
    """Literal sum ``P_nu = sum m!/prod (s_j!)^{r_j} prod phi_{s_j}^{r_j}``.

    ``terms[s]`` holds the ``s``-th coefficient function (grid values, a
    :class:`GridFunction`, or a scalar); ``m = nu - 1``.  Tuples run over
    1..nu-1 positive pairs with ``sum r_j s_j = nu - 1``.  This is kept for
    inspection and is not used by the series engine.
    """
    if nu < 2:
        raise ValueError("P_nu is defined for nu >= 2")
    rule = None
    vals = []
    for t in terms:
        if isinstance(t, GridFunction):
            rule = t.rule
            vals.append(t.values)
        else:
            vals.append(np.asarray(t, dtype=float))
    m = nu - 1
    if len(vals) < m + 1:
        raise ValueError(f"P_{nu} needs terms 0..{m}")
    total = np.zeros(np.broadcast_shapes(*[v.shape for v in vals]))
    for tup in pair_tuples(m, m):
        coef = math.factorial(m)
        prod = np.ones_like(total)
        for r, s in tup:
            coef /= math.factorial(s) ** r
            prod = prod * vals[s] ** r
        total = total + coef * prod
    return GridFunction(rule, total) if rule is not None else total

"""Grid functions and discretized integral operators on [0, 1].

A kernel ``G(x, y)`` is sampled at the quadrature nodes, ``M[i, j] =
G(x_i, y_j)``, and acts on grid values by ``(K g)_i = sum_j w_j M[i, j] g_j``.
The operator-norm estimates returned by :func:`kernel_norms` are exact bounds
for this discrete action in the corresponding weighted norms, which is what
lets the convergence bounds hold literally on the grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import expr as ex
from .quadrature import QuadratureRule

NORM_KINDS = ("sup", "l2", "l1")


def _check_rule(a: QuadratureRule, b: QuadratureRule):
    if not a.same_as(b):
        raise ValueError(f"rule mismatch: {a!r} vs {b!r}")


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values of a function at the nodes of ``rule``."""

    rule: QuadratureRule
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.rule.n,):
            raise ValueError(f"expected {self.rule.n} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_expression(cls, rule, e, var="x"):
        val = ex.evaluate(ex.parse(e), {var: rule.nodes})
        return cls(rule, np.broadcast_to(val, (rule.n,)))

    @classmethod
    def zeros(cls, rule):
        return cls(rule, np.zeros(rule.n))

    @property
    def nodes(self):
        return self.rule.nodes

    def norm_sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def norm_l2(self) -> float:
        return float(np.sqrt(self.rule.weights @ self.values**2))

    def norm_l1(self) -> float:
        return float(self.rule.weights @ np.abs(self.values))

    def norm(self, kind: str = "sup") -> float:
        if kind == "sup":
            return self.norm_sup()
        if kind == "l2":
            return self.norm_l2()
        if kind == "l1":
            return self.norm_l1()
        raise ValueError(f"unknown norm kind {kind!r}")

    def inner(self, other: "GridFunction") -> float:
        _check_rule(self.rule, other.rule)
        return float(self.rule.weights @ (self.values * other.values))

    def _coerce(self, other):
        if isinstance(other, GridFunction):
            _check_rule(self.rule, other.rule)
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.rule, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.rule, self.values - self._coerce(other))

    def __rsub__(self, other):
        return GridFunction(self.rule, self._coerce(other) - self.values)

    def __mul__(self, other):
        return GridFunction(self.rule, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return GridFunction(self.rule, self.values / self._coerce(other))

    def __neg__(self):
        return GridFunction(self.rule, -self.values)

    def __repr__(self):
        return f"GridFunction(n={self.rule.n}, sup={self.norm_sup():.6g})"


@dataclass(frozen=True)
class KernelNorms:
    """Norm estimates of a discretized kernel.

    ``C_sup`` is the pointwise bound; ``N_inf``, ``N_2`` and ``N_1`` bound the
    discrete operator in the sup, weighted L2 (Hilbert-Schmidt) and weighted
    L1 norms.
    """

    C_sup: float
    N_inf: float
    N_2: float
    N_1: float

    def operator_bound(self, kind: str = "sup") -> float:
        return {"sup": self.N_inf, "l2": self.N_2, "l1": self.N_1}[kind]


@dataclass(frozen=True, eq=False)
class DiscreteKernel:
    """Kernel matrix on a quadrature grid, optionally with its x-derivative."""

    rule: QuadratureRule
    matrix: np.ndarray
    dx: Optional[np.ndarray] = None
    expression: Optional[ex.Expression] = None

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        n = self.rule.n
        if m.shape != (n, n):
            raise ValueError(f"kernel matrix must be {n}x{n}, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("kernel matrix has non-finite entries")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.dx is not None:
            d = np.array(self.dx, dtype=float)
            if d.shape != (n, n) or not np.all(np.isfinite(d)):
                raise ValueError("x-derivative matrix must be finite and n x n")
            d.setflags(write=False)
            object.__setattr__(self, "dx", d)

    @property
    def weighted(self) -> np.ndarray:
        """``M W``: the matrix acting on raw grid values."""
        return self.matrix * self.rule.weights[None, :]

    def __call__(self, g):
        return apply_kernel(self, g)

    def combine(self, other: "DiscreteKernel", scale: float) -> "DiscreteKernel":
        """The kernel ``self + scale*other`` (matrices and derivatives)."""
        _check_rule(self.rule, other.rule)
        dx = None
        if self.dx is not None and other.dx is not None:
            dx = self.dx + scale * other.dx
        e = None
        if self.expression is not None and other.expression is not None:
            e = ex.make_add(self.expression, ex.make_mul(ex.Num(scale), other.expression))
        return DiscreteKernel(self.rule, self.matrix + scale * other.matrix, dx, e)

    def scale_columns(self, d) -> "DiscreteKernel":
        """The kernel ``G(x, y) d(y)``; used for Jacobians of Hammerstein maps."""
        d = np.asarray(d, dtype=float)
        return DiscreteKernel(self.rule, self.matrix * d[None, :])

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.T), initial=0.0) <= tol)

    def is_zero(self) -> bool:
        return not np.any(self.matrix)


def discretize_kernel(e, rule: QuadratureRule, with_x_derivative: bool = False,
                      clamp: Optional[float] = None) -> DiscreteKernel:
    """Sample a kernel expression in ``x, y`` on ``rule``.

    ``clamp`` truncates the kernel magnitude; it is applied only when given,
    for kernels that are square integrable but unbounded.
    """
    e = ex.parse(e)
    extra = ex.free_variables(e) - {"x", "y"}
    if extra:
        raise ex.EvaluationError(f"kernel may only use x and y, found {sorted(extra)}")
    X = rule.nodes[:, None]
    Y = rule.nodes[None, :]
    shape = (rule.n, rule.n)
    m = np.broadcast_to(ex.evaluate(e, {"x": X, "y": Y}), shape)
    dx = None
    if with_x_derivative:
        de = ex.differentiate(e, "x")
        dx = np.broadcast_to(ex.evaluate(de, {"x": X, "y": Y}), shape)
    if clamp is not None:
        if clamp <= 0:
            raise ValueError("clamp must be positive")
        m = np.clip(m, -clamp, clamp)
        e = None  # the clamped matrix no longer matches the expression
    return DiscreteKernel(rule, m, dx, e)


def apply_kernel(K: DiscreteKernel, g: GridFunction) -> GridFunction:
    _check_rule(K.rule, g.rule)
    return GridFunction(K.rule, K.matrix @ (K.rule.weights * g.values))


def kernel_norms(K: DiscreteKernel) -> KernelNorms:
    w = K.rule.weights
    A = np.abs(K.matrix)
    return KernelNorms(
        C_sup=float(A.max()),
        N_inf=float(np.max(A @ w)),
        N_2=float(np.sqrt(w @ K.matrix**2 @ w)),
        N_1=float(np.max(w @ A)),
    )


def derivative_bound(K: DiscreteKernel) -> float:
    """sup |dG/dx| over the grid; requires the derivative matrix."""
    if K.dx is None:
        raise ValueError("kernel was discretized without its x-derivative")
    return float(np.max(np.abs(K.dx)))

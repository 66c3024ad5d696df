"""Linear Fredholm equations of the second kind, ``phi - omega*K phi = f``.

Three routes are provided:

* :func:`solve_fredholm2` -- Nystrom collocation at the quadrature nodes,
* :func:`spectral_resolvent_solve` -- eigenfunction expansion for symmetric
  kernels,
* :func:`singular_solve` -- Fredholm-alternative solve when ``I - omega*K``
  is singular; returns the minimal-norm solution and an explicit
  solvability verdict.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import expr as ex
from .exceptions import CharacteristicValueError
from .operators import DiscreteKernel, GridFunction, _check_rule

CONDITION_LIMIT = 1e12
RESONANCE_TOL = 1e-10
NULLSPACE_RTOL = 1e-10


def _system(K: DiscreteKernel, omega: float) -> np.ndarray:
    return np.eye(K.rule.n) - omega * K.weighted


class Resolvent:
    """LU-factored ``(I - omega*K*W)`` for repeated right-hand sides.

    Raises :class:`CharacteristicValueError` at construction when the
    condition number exceeds ``1e12``, i.e. ``omega`` is numerically a
    characteristic value of the kernel.
    """

    def __init__(self, K: DiscreteKernel, omega: float):
        self.kernel = K
        self.omega = omega
        A = _system(K, omega)
        self.condition = float(np.linalg.cond(A)) if omega != 0 else 1.0
        if not np.isfinite(self.condition) or self.condition > CONDITION_LIMIT:
            raise CharacteristicValueError(
                f"omega={omega:g} is a characteristic value of the kernel "
                f"(condition number {self.condition:.3e})",
                condition=self.condition,
            )
        self._lu = scipy.linalg.lu_factor(A, check_finite=False)

    def solve(self, f: GridFunction) -> GridFunction:
        _check_rule(self.kernel.rule, f.rule)
        if self.omega == 0:
            return f
        return GridFunction(f.rule, scipy.linalg.lu_solve(self._lu, f.values, check_finite=False))


def solve_fredholm2(K: DiscreteKernel, omega: float, f: GridFunction) -> GridFunction:
    """Nystrom solution of ``phi = f + omega * int K(x, y) phi(y) dy``.

    Raises
    ------
    CharacteristicValueError
        If ``omega`` is (numerically) a characteristic value of the kernel.
    """
    _check_rule(K.rule, f.rule)
    if omega == 0:
        return f
    return Resolvent(K, omega).solve(f)


def nystrom_interpolate(K: DiscreteKernel, omega: float, f, phi: GridFunction, x):
    """Evaluate the Nystrom interpolant of ``phi`` at arbitrary points ``x``.

    ``phi(x) = f(x) + omega * sum_j w_j K(x, y_j) phi_j``; ``f`` is a callable,
    an expression in ``x`` or ``None`` for a homogeneous equation.  The kernel
    must carry its expression.
    """
    if K.expression is None:
        raise ValueError("kernel has no expression; cannot interpolate off the grid")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    G = np.broadcast_to(
        ex.evaluate(K.expression, {"x": x[:, None], "y": K.rule.nodes[None, :]}),
        (x.size, K.rule.n),
    )
    out = omega * G @ (K.rule.weights * phi.values)
    if f is not None:
        if callable(f) and not isinstance(f, ex.Expression):
            fx = f(x)
        else:
            fx = ex.evaluate(ex.parse(f), {"x": x})
        out = out + np.broadcast_to(fx, x.shape)
    return out


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Eigenpairs of a symmetric kernel, ordered by decreasing ``|mu|``.

    Eigenfunctions are orthonormal in the weighted inner product
    ``(g, h) = sum_i w_i g_i h_i``.
    """

    kernel: DiscreteKernel
    eigenvalues: np.ndarray
    vectors: np.ndarray  # columns are eigenfunction grid values

    @property
    def rule(self):
        return self.kernel.rule

    def __len__(self):
        return self.eigenvalues.size

    def eigenfunction(self, j: int) -> GridFunction:
        return GridFunction(self.rule, self.vectors[:, j])

    @property
    def eigenfunctions(self):
        return [self.eigenfunction(j) for j in range(len(self))]


def _fix_sign(v, rtol=1e-6):
    # first significantly nonzero entry positive
    scale = np.max(np.abs(v))
    if scale == 0:
        return v
    idx = np.flatnonzero(np.abs(v) > rtol * scale)[0]
    return v if v[idx] > 0 else -v


def eigendecompose(K: DiscreteKernel) -> EigenSystem:
    """Eigen-expansion of a symmetric kernel.

    Diagonalizes ``W^(1/2) M W^(1/2)`` and maps eigenvectors back by
    ``W^(-1/2)``.  Each eigenfunction is signed so that its first
    significantly nonzero node value is positive.
    """
    if not K.is_symmetric(1e-12):
        raise ValueError("eigendecompose requires a symmetric kernel")
    s = np.sqrt(K.rule.weights)
    S = s[:, None] * K.matrix * s[None, :]
    S = 0.5 * (S + S.T)
    mu, U = np.linalg.eigh(S)
    order = np.argsort(-np.abs(mu), kind="stable")
    mu = mu[order]
    V = U[:, order] / s[:, None]
    V = np.column_stack([_fix_sign(V[:, j]) for j in range(V.shape[1])])
    mu.setflags(write=False)
    V.setflags(write=False)
    return EigenSystem(K, mu, V)


def spectral_resolvent_solve(es: EigenSystem, omega: float, f: GridFunction,
                             report: bool = False):
    """Resolvent solution by eigen-expansion.

    Computes ``f + omega * sum_j mu_j / (1 - omega*mu_j) (f, phi_j) phi_j``
    over modes with ``|1 - omega*mu_j| > 1e-10``; resonant modes are skipped.
    With ``report=True`` returns ``(phi, skipped_indices)``.
    """
    _check_rule(es.rule, f.rule)
    w = es.rule.weights
    coef = es.vectors.T @ (w * f.values)
    denom = 1.0 - omega * es.eigenvalues
    keep = np.abs(denom) > RESONANCE_TOL
    gain = np.zeros_like(denom)
    gain[keep] = omega * es.eigenvalues[keep] / denom[keep]
    phi = GridFunction(es.rule, f.values + es.vectors @ (gain * coef))
    if report:
        return phi, [int(j) for j in np.flatnonzero(~keep)]
    return phi


@dataclass(frozen=True, eq=False)
class SingularSolveResult:
    solution: GridFunction
    solvable: bool
    nullspace_residual: float
    nullity: int = 0
    singular_values: np.ndarray = field(default=None, repr=False)


def singular_solve(K: DiscreteKernel, omega: float, f: GridFunction,
                   tol: float = 1e-8, atol: float = 0.0) -> SingularSolveResult:
    """Fredholm-alternative solve of ``(I - omega*K) phi = f``.

    The system is symmetrized with ``W^(1/2)`` so that Euclidean quantities
    equal weighted L2 ones.  Singular values below ``1e-10 * sigma_max``
    span the numerical null space.  The data is solvable when its component
    along the adjoint null space is at most ``tol * ||f|| + atol``; the returned
    solution has no null-space component (minimal weighted L2 norm).  An
    unsolvable system still returns the least-squares minimal-norm solution,
    with ``solvable=False``.
    """
    _check_rule(K.rule, f.rule)
    s = np.sqrt(K.rule.weights)
    B = np.eye(K.rule.n) - omega * (s[:, None] * K.matrix * s[None, :])
    g = s * f.values
    U, sig, Vt = np.linalg.svd(B)
    cutoff = NULLSPACE_RTOL * sig[0] if sig.size else 0.0
    rank = int(np.sum(sig > cutoff))
    gnorm = float(np.linalg.norm(g))
    proj = U[:, rank:].T @ g
    residual = float(np.linalg.norm(proj))
    solvable = residual <= tol * gnorm + atol or gnorm == 0.0
    c = U[:, :rank].T @ g / sig[:rank]
    u = Vt[:rank].T @ c
    return SingularSolveResult(
        solution=GridFunction(K.rule, u / s),
        solvable=bool(solvable),
        nullspace_residual=residual,
        nullity=K.rule.n - rank,
        singular_values=sig,
    )

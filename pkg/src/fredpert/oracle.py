"""Reference solutions independent of the series recursion.

* :func:`direct_solve_at` solves the full equation at a fixed ``eps``,
* :func:`fd_coefficients` estimates Taylor coefficients from direct solves,
* :func:`separable_closed_form` solves rank-one kernels through a 2x2
  moment system computed with adaptive quadrature.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np
import scipy.integrate

from . import expr as ex
from .exceptions import CharacteristicValueError, NumericalFailure
from .linear_solver import solve_fredholm2
from .operators import GridFunction
from .series_engine import as_discrete, eigen_base, newton_hammerstein


def direct_solve_at(p, eps: float, method: str = "auto",
                    initial: Optional[GridFunction] = None) -> GridFunction:
    """Solve the equation at perturbation ``eps`` without any series.

    ``method="linear"`` uses a Nystrom solve with kernel ``G0 + eps*G1``;
    ``"newton"`` runs damped Newton on the full nonlinear residual.
    ``"auto"`` picks the linear path for linear problems.  Newton starts
    from ``initial``, else from ``f``, else from the scaled resonant
    eigenfunction of the unperturbed kernel.
    """
    dp = as_discrete(p).at(eps)
    if method == "auto":
        method = "linear" if dp.is_linear else "newton"
    if method == "linear":
        if not dp.is_linear:
            raise ValueError("linear method needs psi0 = z and psi1 = 0")
        return solve_fredholm2(dp.kernel0, dp.omega, dp.f)
    if method != "newton":
        raise ValueError(f"unknown method {method!r}")
    if initial is None:
        if np.any(dp.f.values):
            initial = dp.f
        else:
            base = as_discrete(p).at(0.0)
            initial, _ = eigen_base(base.kernel0, base.omega, base.base_scale)
    phi, _, _ = newton_hammerstein(dp.kernel0, dp.omega, dp.f, dp.psi0, initial)
    return phi


FD_LEVELS = 3
FD_LADDER = 8
FD_OFFSETS = 4


def max_fd_step(p) -> float:
    """Largest trial step: ``0.2 * max(1, 1/rho)``, ``rho`` for linear problems."""
    dp = as_discrete(p)
    rho = dp.rho() if dp.is_linear else None
    return 0.2 * max(1.0, 1.0 / rho) if rho else 0.2


def _forward_difference(values, h):
    k = len(values) - 1
    total = sum((-1) ** (k - i) * math.comb(k, i) * v for i, v in enumerate(values))
    return total / (h**k * math.factorial(k))


def _richardson(table):
    # table[i] is the estimate at step h/2**i; the error is a power series in h
    for m in range(1, len(table)):
        table = [(2**m * fine - coarse) / (2**m - 1) for coarse, fine in zip(table, table[1:])]
    return table[0]


def fd_coefficients(p, k: int, h: Optional[float] = None, method: str = "auto",
                    levels: int = FD_LEVELS) -> GridFunction:
    """k-th Taylor coefficient in ``eps`` from one-sided differences.

    The forward difference ``D(h) = Delta_h^k phi(0) / (k! h^k)`` built from
    direct solves on ``eps in {0, h, ..., k h}`` equals ``sum_m a_{k+m}
    S(k+m, k) h^m`` (``S`` Stirling numbers of the second kind), a power
    series in ``h``.  ``levels`` Richardson steps over ``h, h/2, ...,
    h/2**levels`` remove the first ``levels`` error terms.  Only
    ``eps >= 0`` is sampled.

    With ``h=None`` the step is chosen adaptively: differences are formed on
    interleaved ladders ``h_max * 2**(-j - o/4)`` (``h_max`` from
    :func:`max_fd_step`), each window of ``levels + 1`` consecutive steps of
    a ladder is extrapolated, and the mean of the two neighbouring (by step)
    extrapolations that agree best is returned.  Steps
    whose stencil cannot be solved are skipped.
    """
    if k < 0 or int(k) != k:
        raise ValueError("order must be a non-negative integer")
    if levels < 0 or int(levels) != levels:
        raise ValueError("levels must be a non-negative integer")
    dp = as_discrete(p)
    base = dp.base_epsilon
    phi0 = direct_solve_at(dp, base, method)
    if k == 0:
        return phi0

    def stencil(step):
        vals = [phi0.values]
        prev = phi0
        for i in range(1, k + 1):
            prev = direct_solve_at(dp, base + i * step, method,
                                   initial=None if dp.is_linear else prev)
            vals.append(prev.values)
        return _forward_difference(vals, step)

    if h is not None:
        h = float(h)
        if not h > 0:
            raise ValueError("step must be positive")
        return GridFunction(dp.rule, _richardson([stencil(h / 2**i) for i in range(levels + 1)]))

    h_max = max_fd_step(dp)
    candidates = []
    for offset in range(FD_OFFSETS):
        top = h_max * 2.0 ** (-offset / FD_OFFSETS)
        diffs = []
        for j in range(FD_LADDER + levels + 1):
            try:
                diffs.append(stencil(top / 2**j))
            except NumericalFailure:
                diffs.append(None)
        for i in range(len(diffs) - levels):
            window = diffs[i:i + levels + 1]
            if all(d is not None for d in window):
                candidates.append((top / 2**i, _richardson(window)))
    candidates.sort(key=lambda c: -c[0])
    best, best_gap = None, math.inf
    for (_, a), (_, b) in zip(candidates, candidates[1:]):
        gap = float(np.max(np.abs(a - b)))
        if gap < best_gap:
            best, best_gap = 0.5 * (a + b), gap
    if best is None:
        raise NumericalFailure("no finite-difference stencil could be solved")
    return GridFunction(dp.rule, best)


def _moment(fn: Callable[[float], float]) -> float:
    val, _ = scipy.integrate.quad(fn, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def _scalar(e):
    e = ex.parse(e)
    return lambda t: float(ex.evaluate(e, {"x": t, "y": t}))


def separable_closed_form(p, factors0=None, factors1=None) -> Callable[[float], GridFunction]:
    """Exact solution map ``eps -> phi`` for rank-one kernels.

    With ``G0 = g(x) h(y)`` and ``G1 = u(x) v(y)`` the solution is
    ``phi = f + omega (A g + eps B u)`` where ``A = (h, phi)`` and
    ``B = (v, phi)`` solve a 2x2 linear system whose entries are moments
    of the factors, integrated adaptively.  Factor pairs are expression
    strings; they default to the problem's declared ``separable`` entry.
    A zero second kernel may be given as ``None``.

    Raises :class:`CharacteristicValueError` when the moment system is
    singular at the requested ``eps``.
    """
    dp = as_discrete(p)
    spec = dp.spec
    if not dp.is_linear:
        raise ValueError("closed form covers linear problems only")
    declared = spec.separable or {}
    factors0 = factors0 or declared.get("kernel0")
    factors1 = factors1 or declared.get("kernel1")
    if factors0 is None:
        raise ValueError("rank-one factors of kernel0 are required")
    g, h = (_scalar(e) for e in factors0)
    if factors1 is None:
        u = v = (lambda t: 0.0)
    else:
        u, v = (_scalar(e) for e in factors1)
    f = _scalar(spec.forcing)
    om = spec.omega
    hg, hu, vg, vu = (_moment(lambda t, a=a, b=b: a(t) * b(t))
                      for a, b in ((h, g), (h, u), (v, g), (v, u)))
    hf, vf = _moment(lambda t: h(t) * f(t)), _moment(lambda t: v(t) * f(t))
    fx = GridFunction.from_expression(dp.rule, spec.forcing)
    gx = np.array([g(t) for t in dp.rule.nodes])
    ux = np.array([u(t) for t in dp.rule.nodes])

    def solve(eps: float) -> GridFunction:
        A = np.array([[1.0 - om * hg, -om * eps * hu],
                      [-om * vg, 1.0 - om * eps * vu]])
        det = np.linalg.det(A)
        if abs(det) <= 1e-12 * max(1.0, np.max(np.abs(A)) ** 2):
            raise CharacteristicValueError(f"moment system singular at eps={eps:g}")
        a, b = np.linalg.solve(A, [hf, vf])
        return GridFunction(dp.rule, fx.values + om * (a * gx + eps * b * ux))

    return solve

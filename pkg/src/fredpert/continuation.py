"""Radius estimation, re-expansion along the perturbation axis, variation.

:func:`continue_to` walks from ``eps = 0`` towards a target by re-centring
the series at successive base points; the base points form a
:class:`Partition`.  Each step is a fixed fraction of the empirical radius
at the current base, so the walk stalls in front of a singularity and
reports how far it got.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import expr as ex
from .exceptions import NumericalFailure
from .operators import GridFunction
from .oracle import direct_solve_at
from .series_engine import SeriesSolution, as_discrete, evaluate_series, solve_series

RATIO_WINDOW = 5
ZERO_TAIL_RTOL = 1e-13


@dataclass(frozen=True)
class Partition:
    """Strictly increasing, non-negative points ``eps_0 < ... < eps_m``."""

    points: tuple

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        if not pts:
            raise ValueError("a partition needs at least one point")
        if any(not math.isfinite(p) or p < 0 for p in pts):
            raise ValueError("partition points must be finite and non-negative")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError("partition points must be strictly increasing")
        object.__setattr__(self, "points", pts)

    @property
    def span(self) -> float:
        return self.points[-1] - self.points[0]

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)


@dataclass(frozen=True)
class RadiusEstimate:
    """Outcome of :func:`empirical_radius`.

    ``radius`` is the reported value.  ``lower_bound`` is set when a direct
    solve failed during the agreement search, so the true radius may be
    larger than reported.
    """

    radius: float
    ratio_radius: float
    agreement_radius: float
    lower_bound: bool = False

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.radius)

    def __float__(self):
        return self.radius


def ratio_radius(norms: Sequence[float], window: int = RATIO_WINDOW) -> float:
    """Median of the last ``window`` ratios ``||a_j|| / ||a_{j+1}||``.

    Returns ``math.inf`` when every coefficient beyond ``a_0`` is negligible.
    """
    norms = np.asarray(norms, dtype=float)
    scale = max(1.0, float(norms[0])) if norms.size else 1.0
    tail = norms[1:]
    if tail.size == 0 or np.all(tail <= ZERO_TAIL_RTOL * scale):
        return math.inf
    ratios = []
    for j in range(norms.size - 2, 0, -1):
        if norms[j + 1] > 0 and norms[j] > 0:
            ratios.append(norms[j] / norms[j + 1])
        if len(ratios) == window:
            break
    if not ratios:
        return math.inf
    return float(np.median(ratios))


def root_radius(norms: Sequence[float]) -> float:
    """Tail root estimate ``(||a_{N/2}|| / ||a_N||)^(1/(N - N/2))``.

    Averages out the oscillating ratios produced by complex singularities,
    where the median of single-step ratios depends on parity.
    """
    norms = np.asarray(norms, dtype=float)
    N = norms.size - 1
    m = N // 2
    if N < 2 or norms[N] <= 0 or norms[m] <= 0:
        return math.inf
    return float((norms[m] / norms[N]) ** (1.0 / (N - m)))


def empirical_radius(p, s: Optional[SeriesSolution] = None, tol: float = 1e-8,
                     order: int = 30, iterations: int = 50) -> RadiusEstimate:
    """Empirical convergence radius of the series about its base point.

    Candidates are the median of the last five coefficient ratios and, as
    a fallback, the tail root estimate of :func:`root_radius`.  A candidate
    ``r`` is accepted when the truncated series agrees with a direct solve at
    offset ``r/2``, i.e. ``||series - direct||_sup <= tol (1 + ||direct||)``.
    If no candidate passes, the largest agreeing offset found by bisection
    is reported instead.  ``agreement_radius`` always holds that offset.
    """
    dp = as_discrete(p)
    if s is None:
        s = solve_series(dp, order)
    if s.truncation < 10:
        raise ValueError("empirical radius needs a series of order >= 10")
    dp = s.problem
    base = s.base_epsilon
    norms = s.norms("sup")
    r_ratio = ratio_radius(norms)
    failed = False

    def agrees(d):
        nonlocal failed
        approx = evaluate_series_quiet(s, base + d)
        try:
            direct = direct_solve_at(dp, base + d, initial=None if dp.is_linear else approx)
        except NumericalFailure:
            failed = True
            return False
        err = float(np.max(np.abs(approx.values - direct.values)))
        return err <= tol * (1.0 + direct.norm_sup())

    if math.isinf(r_ratio):
        probe = 1.0
        while probe < 1e6 and agrees(probe):
            probe *= 4.0
        if probe >= 1e6:
            return RadiusEstimate(math.inf, math.inf, math.inf, False)
        r_agree = _bisect(agrees, 0.0, probe, iterations)
        return RadiusEstimate(r_agree, r_ratio, r_agree, failed)

    for r in (r_ratio, root_radius(norms)):
        if math.isfinite(r) and agrees(0.5 * r):
            r_agree = _bisect(agrees, 0.5 * r, r, iterations)
            return RadiusEstimate(r, r_ratio, r_agree, False)
    r_agree = _bisect(agrees, 0.0, 0.5 * r_ratio, iterations)
    return RadiusEstimate(r_agree, r_ratio, r_agree, failed)


def _bisect(pred: Callable[[float], bool], lo: float, hi: float, iterations: int) -> float:
    # pred(lo) is assumed true; returns the largest point found with pred true
    if pred(hi):
        return hi
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
    return lo


def evaluate_series_quiet(s: SeriesSolution, eps: float) -> GridFunction:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return evaluate_series(s, eps)


@dataclass
class ContinuationStep:
    base: float
    radius: float
    step: float
    series: SeriesSolution = field(repr=False)


@dataclass
class ContinuationResult:
    """Outcome of :func:`continue_to`.

    ``status`` is ``"reached"``, ``"radius collapse"`` or ``"solve
    failure"``; in the latter cases ``reached_epsilon`` is the last base
    point, the maximal perturbation obtained along this path.
    """

    partition: Partition
    solution: GridFunction
    steps: list
    status: str
    target: float
    reached_epsilon: float
    final_error: Optional[float] = None
    message: str = ""

    @property
    def success(self) -> bool:
        return self.status == "reached"


def continue_to(p, target: float, step_fraction: float = 0.5, order: int = 30,
                tol: float = 1e-8, min_step: float = 1e-6,
                max_steps: int = 500) -> ContinuationResult:
    """Extend the solution to ``eps = target`` by successive re-expansion.

    At base ``e_k`` the problem is re-centred (``G0 + e_k G1`` and ``psi0 +
    e_k psi1`` become the unperturbed data; nonlinear bases are seeded with
    the solution obtained at ``e_k``).  The next base is ``e_k + step_fraction
    * r_k`` with ``r_k`` the empirical radius, capped at the target; the
    solution there is the series value, polished by a direct solve.  A step
    below ``min_step`` ends the walk with status ``"radius collapse"``.
    The returned solution at the target is the series value from the last
    base; ``final_error`` compares it with an independent direct solve.
    """
    target = float(target)
    if not (target >= 0 and math.isfinite(target)):
        raise ValueError("target must be a finite non-negative number")
    if not 0 < step_fraction <= 1:
        raise ValueError("step_fraction must lie in (0, 1]")
    dp0 = as_discrete(p)
    points = [0.0]
    steps = []
    phi = None
    eps = 0.0
    status, message = "reached", ""
    solution = None
    while True:
        dp = dp0.at(eps)
        s = solve_series(dp, order, initial=phi if (phi is not None and not dp.is_linear) else None)
        if s.failure:
            status, message = "solve failure", s.failure
            solution = s.coefficients[0]
            break
        if eps >= target:
            solution = s.coefficients[0]
            steps.append(ContinuationStep(eps, math.nan, 0.0, s))
            break
        try:
            r = empirical_radius(dp, s, tol).radius
        except NumericalFailure as err:
            status, message = "solve failure", str(err)
            solution = s.coefficients[0]
            break
        step = step_fraction * r
        if step < min_step or len(steps) >= max_steps:
            status = "radius collapse"
            message = f"step {step:.3e} below minimum at eps={eps:.17g}"
            solution = s.coefficients[0]
            steps.append(ContinuationStep(eps, r, step, s))
            break
        nxt = min(eps + step, target)
        steps.append(ContinuationStep(eps, r, nxt - eps, s))
        approx = evaluate_series_quiet(s, nxt)
        if nxt >= target:
            solution = approx
            eps = nxt
            points.append(nxt)
            break
        try:
            phi = direct_solve_at(dp0, nxt, initial=None if dp.is_linear else approx)
        except NumericalFailure as err:
            status, message = "solve failure", str(err)
            solution = s.coefficients[0]
            break
        eps = nxt
        points.append(nxt)

    final_error = None
    if status == "reached":
        try:
            direct = direct_solve_at(dp0, target, initial=None if dp0.is_linear else solution)
            final_error = float(np.max(np.abs(solution.values - direct.values)))
        except NumericalFailure as err:
            message = f"direct check failed: {err}"
    return ContinuationResult(Partition(points), solution, steps, status, target,
                              points[-1], final_error, message)


# ----------------------------------------------------------------------------
# variation functionals and partition order

SEGMENT_KINDS = ("convex", "concave")


def _values_at(f, points):
    points = np.asarray(points, dtype=float)
    if callable(f) and not isinstance(f, ex.Expression):
        return np.asarray(f(points), dtype=float)
    if isinstance(f, (str, ex.Expression)):
        return np.broadcast_to(ex.evaluate(ex.parse(f), {"x": points}), points.shape)
    vals = np.asarray(f, dtype=float)
    if vals.shape != points.shape:
        raise ValueError("need one value per partition point")
    return vals


def variation(points, values, segments: Optional[Sequence[str]] = None,
              literal: bool = False) -> float:
    """Discrete variation ``sum_j |f(x_{j+1}) - f(x_j)|`` over a partition.

    ``values`` are the function values at ``points`` (or a callable or an
    expression in ``x``).  ``segments`` optionally labels each interval
    ``"convex"`` or ``"concave"``; the labels are validated but do not change
    the result.  ``literal=True`` returns the sum of difference quotients
    ``|Delta f / Delta x|`` instead, which grows without bound under
    refinement.
    """
    pts = Partition(tuple(np.asarray(points, dtype=float).ravel())).points
    x = np.array(pts)
    f = _values_at(values, x)
    if not np.all(np.isfinite(f)):
        raise ValueError("function values must be finite")
    if segments is not None:
        segments = list(segments)
        if len(segments) != x.size - 1:
            raise ValueError("need one segment label per interval")
        bad = [s for s in segments if s not in SEGMENT_KINDS]
        if bad:
            raise ValueError(f"segment labels must be in {SEGMENT_KINDS}, got {bad}")
    df = np.abs(np.diff(f))
    if literal:
        return float(np.sum(df / np.diff(x)))
    return float(np.sum(df))


def uniform_variation(f, n: int, a: float = 0.0, b: float = 1.0) -> float:
    """Variation of ``f`` on the uniform partition of ``[a, b]`` into ``n`` cells."""
    if n < 1:
        raise ValueError("need at least one cell")
    return variation(np.linspace(a, b, n + 1), f)


def partition_compare(P: Partition, Q: Partition, f) -> int:
    """Order partitions by span, then by decreasing variation of ``f``.

    Returns -1 when ``P`` precedes ``Q`` (smaller span, or equal spans and
    larger variation), 1 when ``Q`` precedes ``P``, 0 otherwise.
    """
    P = P if isinstance(P, Partition) else Partition(tuple(P))
    Q = Q if isinstance(Q, Partition) else Partition(tuple(Q))
    if P.span != Q.span:
        return -1 if P.span < Q.span else 1
    vp = variation(P.points, _values_at(f, P.points))
    vq = variation(Q.points, _values_at(f, Q.points))
    if vp == vq:
        return 0
    return -1 if vp > vq else 1

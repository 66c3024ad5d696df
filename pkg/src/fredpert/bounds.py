"""Closed-form convergence bounds and admissibility thresholds.

Linear kernel perturbations: ``rho = |omega| N1 / (1 - |omega| N0)`` bounds
the growth of the series coefficients, ``||a_j|| <= rho**j ||a_0||``.

Hammerstein perturbations: with kernel bounds ``C0, C1`` and growth constant
``D``, admissible ``omega`` lie below the roots of

    (D*C1 + 2*C0**2) g**2 - (2*D*C0 + C0 + C1) g + 1 = 0,

whose discriminant is ``Delta``; when ``Delta < 0`` every ``omega`` is
admissible.  ``eps`` must stay below ``1/D``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import expr as ex
from .faa_di_bruno import count_E
from .operators import NORM_KINDS, derivative_bound, kernel_norms


def rho_linear(omega: float, N0: float, N1: float) -> Optional[float]:
    """Coefficient growth ratio; ``None`` when ``|omega| N0 >= 1``."""
    a = abs(omega)
    if a * N0 >= 1.0:
        return None
    return a * N1 / (1.0 - a * N0)


def _quadratic(C0, C1, D):
    a = D * C1 + 2.0 * C0 * C0
    b = 2.0 * D * C0 + C0 + C1
    return a, b


def discriminant(C0: float, C1: float, D: float) -> float:
    _, b = _quadratic(C0, C1, D)
    return b * b - 4.0 * (D * C1 + 2.0 * C0 * C0)


def g_pm(C0: float, C1: float, D: float):
    """Roots ``(g_minus, g_plus)`` bounding admissible ``omega``.

    Returns ``None`` when the discriminant is negative: then the bound holds
    for every ``omega``.  Raises ``ValueError`` when ``D*C1 + 2*C0**2 <= 0``.
    """
    a, b = _quadratic(C0, C1, D)
    if not a > 0:
        raise ValueError("degenerate denominator: D*C1 + 2*C0^2 must be positive")
    delta = discriminant(C0, C1, D)
    if delta < 0:
        return None
    r = math.sqrt(delta)
    return (b - r) / (2.0 * a), (b + r) / (2.0 * a)


def quadratic_residual(C0: float, C1: float, D: float, g: float) -> float:
    a, b = _quadratic(C0, C1, D)
    return a * g * g - b * g + 1.0


def envelope(kind: str, eps: float, *, rho: float = 0.0, D: float = 0.0,
             base: float = 1.0) -> float:
    """Bounding envelope of the solution norm.

    ``"exp"``: ``base * exp(rho*eps)``; ``"geometric"``: ``base / (1 -
    rho*eps)``; ``"hammerstein"``: ``1 / (1 - D*eps)``.  The last two require
    ``rho*eps < 1`` and ``D*eps < 1`` respectively.
    """
    if kind == "exp":
        return base * math.exp(abs(rho * eps))
    if kind == "geometric":
        if rho * eps >= 1:
            raise ValueError("geometric envelope needs rho*eps < 1")
        return base / (1.0 - rho * eps)
    if kind == "hammerstein":
        if D * eps >= 1:
            raise ValueError("hammerstein envelope needs D*eps < 1")
        return 1.0 / (1.0 - D * eps)
    raise ValueError(f"unknown envelope kind {kind!r}")


@dataclass(frozen=True)
class AdmissibleRegion:
    omega_max: float  # math.inf when every omega is admissible
    epsilon_max: float
    omega_unbounded: bool


def admissible_region(C0: float, C1: float, D: float) -> AdmissibleRegion:
    """``omega`` below the smaller root ``g_minus`` and ``eps < 1/D``."""
    roots = g_pm(C0, C1, D)
    eps_max = math.inf if D == 0 else 1.0 / D
    if roots is None:
        return AdmissibleRegion(math.inf, eps_max, True)
    return AdmissibleRegion(roots[0], eps_max, False)


def check_b(psi, b: float, nu_max: int = 6, samples: int = 100,
            z_range: float = 1.0, seed: int = 0) -> bool:
    """Sample ``|d^nu psi/dz^nu| <= b**nu / E(nu, nu)`` for ``nu = 0..nu_max``.

    Points are drawn deterministically from ``y in [0, 1]`` and
    ``z in [-z_range, z_range]``.
    """
    psi = ex.parse(psi)
    rng = np.random.default_rng(seed)
    y = rng.uniform(0.0, 1.0, samples)
    z = rng.uniform(-z_range, z_range, samples)
    d = psi
    for nu in range(nu_max + 1):
        if nu:
            d = ex.differentiate(d, "z")
        limit = b**nu / count_E(nu, nu) if nu else 1.0
        try:
            vals = np.broadcast_to(ex.evaluate(d, {"y": y, "z": z}), y.shape)
        except ex.EvaluationError:
            return False
        if np.max(np.abs(vals)) > limit:
            return False
    return True


@dataclass
class BoundsReport:
    """All bound quantities for one problem; ``None`` marks undefined values."""

    norm_kind: str
    omega: float
    C0: float
    C1: float
    C0_prime: Optional[float]
    C1_prime: Optional[float]
    N0: dict
    N1: dict
    rho: Optional[float]
    rho0: Optional[float]
    rho_by_norm: dict
    D: Optional[float]
    D_source: str
    b: Optional[float]
    b_admissible: Optional[bool]
    Delta: Optional[float]
    g_minus: Optional[float]
    g_plus: Optional[float]
    omega_all_admissible: Optional[bool]
    radius_rho: Optional[float]
    radius_D: Optional[float]
    envelopes: dict = field(default_factory=dict)

    def as_dict(self):
        return asdict(self)

    def rows(self):
        """Flat ``(key, value)`` pairs for CSV output."""
        out = []
        for k, v in self.as_dict().items():
            if isinstance(v, dict):
                out.extend((f"{k}.{kk}", vv) for kk, vv in v.items())
            else:
                out.append((k, v))
        return out


def _inv(v):
    if v is None:
        return None
    return math.inf if v == 0 else 1.0 / v


def build_report(problem, D: Optional[float] = None, b: Optional[float] = None,
                 series=None, order: int = 20, epsilon: Optional[float] = None) -> BoundsReport:
    """Assemble a :class:`BoundsReport`.

    ``D`` defaults to the empirical growth constant ``max_j ||a_j||^(1/j)``
    of a computed series (``series`` or a fresh one of the given ``order``).
    ``epsilon``, when given, adds envelope values at that perturbation.
    """
    from .series_engine import as_discrete, solve_series

    dp = as_discrete(problem, with_x_derivative=True)
    K0, K1 = dp.kernel0, dp.kernel1
    n0, n1 = kernel_norms(K0), kernel_norms(K1)
    N0 = {k: n0.operator_bound(k) for k in NORM_KINDS}
    N1 = {k: n1.operator_bound(k) for k in NORM_KINDS}
    rho_by = {k: rho_linear(dp.omega, N0[k], N1[k]) for k in NORM_KINDS}
    try:
        c0p, c1p = derivative_bound(K0), derivative_bound(K1)
    except ValueError:
        c0p = c1p = None

    D_source = "declared"
    if D is None:
        if series is None:
            series = solve_series(dp, order)
        D = series.growth_constant()
        D_source = "estimated"
    a0 = series.coefficients[0].norm(dp.norm) if series is not None else None

    b_ok = None
    if b is not None:
        psi = dp.psi0 if not dp.psi0_is_identity else dp.psi1
        z_range = max(1.0, series.coefficients[0].norm_sup()) if series is not None else 1.0
        b_ok = check_b(psi, b, z_range=z_range)

    C0, C1 = n0.C_sup, n1.C_sup
    delta = gm = gp = all_ok = None
    if D is not None and D * C1 + 2 * C0 * C0 > 0:
        delta = discriminant(C0, C1, D)
        roots = g_pm(C0, C1, D)
        all_ok = roots is None
        if roots is not None:
            gm, gp = roots

    rho = rho_by[dp.norm]
    env = {}
    if epsilon is not None:
        base = a0 if a0 is not None else 1.0
        if rho is not None:
            env["exp"] = envelope("exp", epsilon, rho=rho, base=base)
            env["geometric"] = (envelope("geometric", epsilon, rho=rho, base=base)
                                if rho * epsilon < 1 else math.inf)
        if D is not None:
            env["hammerstein"] = (envelope("hammerstein", epsilon, D=D)
                                  if D * epsilon < 1 else math.inf)

    return BoundsReport(
        norm_kind=dp.norm,
        omega=dp.omega,
        C0=C0,
        C1=C1,
        C0_prime=c0p,
        C1_prime=c1p,
        N0=N0,
        N1=N1,
        rho=rho,
        rho0=rho_by["sup"],
        rho_by_norm=rho_by,
        D=D,
        D_source=D_source,
        b=b,
        b_admissible=b_ok,
        Delta=delta,
        g_minus=gm,
        g_plus=gp,
        omega_all_admissible=all_ok,
        radius_rho=_inv(rho),
        radius_D=_inv(D),
        envelopes=env,
    )

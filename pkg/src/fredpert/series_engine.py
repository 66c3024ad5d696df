"""Perturbation series for kernel- and nonlinearity-perturbed integral equations.

Every supported problem is an instance of

    phi(eps, x) = f(x) + omega * int_0^1 [G0(x,y) + eps*G1(x,y)]
                                   * [psi0(y, phi) + eps*psi1(y, phi)] dy,

which covers linear kernel perturbations (``psi0 = z``, ``psi1 = 0``),
Hammerstein equations with perturbed kernels (``psi1 = 0``) and homogeneous
equations with a perturbed nonlinearity (``G1 = 0``, ``psi0 = z``, ``f = 0``).

Coefficients are plain Taylor coefficients: ``phi(eps) = sum_j a_j
(eps - eps_base)**j``.  With ``R = (I - omega*G0)^-1`` the linear recursion
is ``a_j = R omega G1 a_{j-1}``, which makes ``||a_j|| <= rho**j ||a_0||``
and agreement with a direct solve hold together.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np

from . import expr as ex
from .bounds import rho_linear
from .exceptions import (
    CharacteristicValueError,
    ConfigurationError,
    NewtonDivergenceError,
    ResonanceError,
)
from .faa_di_bruno import PowerTable, TaylorCoefficients
from .linear_solver import (
    CONDITION_LIMIT,
    NULLSPACE_RTOL,
    Resolvent,
    eigendecompose,
    singular_solve,
)
from .operators import NORM_KINDS, DiscreteKernel, GridFunction, discretize_kernel, kernel_norms
from .quadrature import QuadratureRule, build_rule

Z = ex.Var("z")
RESONANT_SOLVE_TOL = 1e-8


class OutsideRadiusWarning(UserWarning):
    """Series evaluated where the guaranteed radius ``1/rho`` is exceeded."""


def _expr(value, allowed, what):
    try:
        e = ex.parse(value)
    except ex.ParseError as err:
        raise ex.ParseError(f"{what}: {err.message}", err.position) from None
    extra = ex.free_variables(e) - set(allowed)
    if extra:
        raise ConfigurationError(f"{what} may only use {sorted(allowed)}, found {sorted(extra)}")
    return e


@dataclass(frozen=True)
class ProblemSpec:
    """A perturbed integral equation plus its discretization settings."""

    kernel0: ex.Expression
    omega: float
    kernel1: ex.Expression = ex.ZERO
    forcing: ex.Expression = ex.ZERO
    psi0: ex.Expression = Z
    psi1: ex.Expression = ex.ZERO
    norm: str = "sup"
    nodes: int = 32
    rule: str = "gauss-legendre"
    base_scale: float = 1.0
    clamp: Optional[float] = None
    separable: Optional[dict] = None
    name: str = ""

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("kernel0", _expr(self.kernel0, ("x", "y"), "kernel0"))
        set_("kernel1", _expr(self.kernel1, ("x", "y"), "kernel1"))
        set_("forcing", _expr(self.forcing, ("x",), "forcing"))
        set_("psi0", _expr(self.psi0, ("y", "z"), "psi0"))
        set_("psi1", _expr(self.psi1, ("y", "z"), "psi1"))
        try:
            omega = float(self.omega)
            base_scale = float(self.base_scale)
        except (TypeError, ValueError):
            raise ConfigurationError("omega and base_scale must be numbers") from None
        if not (math.isfinite(omega) and math.isfinite(base_scale)):
            raise ConfigurationError("omega and base_scale must be finite")
        set_("omega", omega)
        set_("base_scale", base_scale)
        if self.norm not in NORM_KINDS:
            raise ConfigurationError(f"norm must be one of {NORM_KINDS}, got {self.norm!r}")
        if isinstance(self.nodes, bool) or not isinstance(self.nodes, (int, np.integer)) or self.nodes < 2:
            raise ConfigurationError(f"nodes must be an integer >= 2, got {self.nodes!r}")
        try:
            build_rule(self.rule, 2)
        except ValueError as err:
            raise ConfigurationError(str(err)) from None
        if self.clamp is not None:
            try:
                clamp = float(self.clamp)
            except (TypeError, ValueError):
                raise ConfigurationError("clamp must be a number") from None
            if not clamp > 0:
                raise ConfigurationError("clamp must be positive")
            set_("clamp", clamp)

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemSpec":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known - {"description"}
        if extra:
            raise ConfigurationError(f"unknown problem keys: {sorted(extra)}")
        missing = {"kernel0", "omega"} - set(d)
        if missing:
            raise ConfigurationError(f"missing problem keys: {sorted(missing)}")
        kw = {k: v for k, v in d.items() if k in known}
        return cls(**kw)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = str(v) if isinstance(v, ex.Expression) else v
        return out

    def replace(self, **changes) -> "ProblemSpec":
        return replace(self, **changes)

    @property
    def is_linear(self) -> bool:
        return self.psi0 == Z and self.psi1 == ex.ZERO

    def build_rule(self) -> QuadratureRule:
        return build_rule(self.rule, self.nodes)

    def discretize(self, with_x_derivative: bool = False, rule=None) -> "DiscreteProblem":
        rule = rule or self.build_rule()
        K0 = discretize_kernel(self.kernel0, rule, with_x_derivative, self.clamp)
        K1 = discretize_kernel(self.kernel1, rule, with_x_derivative, self.clamp)
        f = GridFunction.from_expression(rule, self.forcing)
        return DiscreteProblem(self, rule, K0, K1, f)


@dataclass(frozen=True, eq=False)
class DiscreteProblem:
    """A :class:`ProblemSpec` on a grid, optionally re-centred at ``base_epsilon``.

    Re-centring at ``e`` absorbs ``e*G1`` into the unperturbed kernel and
    ``e*psi1`` into the unperturbed nonlinearity; the problem keeps the same
    form in the offset ``eps - e``.
    """

    spec: ProblemSpec
    rule: QuadratureRule
    K0: DiscreteKernel
    K1: DiscreteKernel
    f: GridFunction
    base_epsilon: float = 0.0
    kernel0: DiscreteKernel = field(init=False, repr=False)
    psi0: ex.Expression = field(init=False, repr=False)

    def __post_init__(self):
        e = float(self.base_epsilon)
        object.__setattr__(self, "base_epsilon", e)
        k0 = self.K0 if e == 0 or self.K1.is_zero() else self.K0.combine(self.K1, e)
        object.__setattr__(self, "kernel0", k0)
        psi = self.spec.psi0
        if e != 0 and self.spec.psi1 != ex.ZERO:
            psi = ex.make_add(psi, ex.make_mul(ex.Num(e), self.spec.psi1))
        object.__setattr__(self, "psi0", psi)

    @property
    def kernel1(self) -> DiscreteKernel:
        return self.K1

    @property
    def psi1(self) -> ex.Expression:
        return self.spec.psi1

    @property
    def omega(self) -> float:
        return self.spec.omega

    @property
    def norm(self) -> str:
        return self.spec.norm

    @property
    def base_scale(self) -> float:
        return self.spec.base_scale

    @property
    def psi0_is_identity(self) -> bool:
        return self.psi0 == Z

    @property
    def is_linear(self) -> bool:
        return self.psi0 == Z and self.psi1 == ex.ZERO

    @property
    def has_x_derivative(self) -> bool:
        return self.K0.dx is not None and self.K1.dx is not None

    def at(self, eps: float) -> "DiscreteProblem":
        """The same problem re-centred at absolute perturbation ``eps``."""
        return replace(self, base_epsilon=eps)

    def with_omega(self, omega: float) -> "DiscreteProblem":
        return replace(self, spec=self.spec.replace(omega=omega))

    def rho(self, kind: Optional[str] = None) -> Optional[float]:
        kind = kind or self.norm
        n0 = kernel_norms(self.kernel0).operator_bound(kind)
        n1 = kernel_norms(self.K1).operator_bound(kind)
        return rho_linear(self.omega, n0, n1)


def as_discrete(p, with_x_derivative: bool = False) -> DiscreteProblem:
    if isinstance(p, DiscreteProblem):
        if with_x_derivative and not p.has_x_derivative:
            q = p.spec.discretize(True, rule=p.rule)
            return q.at(p.base_epsilon)
        return p
    if isinstance(p, ProblemSpec):
        return p.discretize(with_x_derivative)
    if isinstance(p, dict):
        return ProblemSpec.from_dict(p).discretize(with_x_derivative)
    raise TypeError(f"expected a ProblemSpec or DiscreteProblem, got {type(p).__name__}")


@dataclass
class SeriesSolution:
    """Taylor coefficients ``a_0..a_N`` about ``base_epsilon``.

    ``failure`` is set (and the series truncated) when an order could not be
    computed, e.g. a resonant order violating its solvability condition.
    """

    problem: DiscreteProblem
    base_epsilon: float
    coefficients: list
    radius_estimate: float
    diagnostics: dict = field(default_factory=dict)
    failure: Optional[str] = None
    failed_order: Optional[int] = None

    @property
    def truncation(self) -> int:
        return len(self.coefficients) - 1

    @property
    def rule(self):
        return self.problem.rule

    @property
    def rho(self) -> Optional[float]:
        return self.diagnostics.get("rho")

    def norms(self, kind: Optional[str] = None) -> np.ndarray:
        kind = kind or self.problem.norm
        return np.array([a.norm(kind) for a in self.coefficients])

    def growth_constant(self, kind: str = "sup") -> float:
        """Empirical ``D = max_j ||a_j||^(1/j)`` over ``j >= 1``."""
        nrm = self.norms(kind)[1:]
        if nrm.size == 0:
            return 0.0
        j = np.arange(1, nrm.size + 1)
        return float(np.max(nrm ** (1.0 / j)))

    def __call__(self, eps, M=None) -> GridFunction:
        return evaluate_series(self, eps, M)


# ----------------------------------------------------------------------------
# base solutions

def newton_hammerstein(K: DiscreteKernel, omega: float, f: GridFunction, psi,
                       initial: GridFunction, tol: float = 1e-12, maxiter: int = 100):
    """Damped Newton for ``phi = f + omega * K psi(y, phi)`` on the grid.

    Steps are halved until the residual decreases; a numerically singular
    Jacobian gets the minimal-norm least-squares step.  Converged when the sup
    residual is below ``tol * max(1, ||f||, ||phi||)``; a couple of extra
    polishing steps are taken while they keep reducing the residual.
    Returns ``(phi, iterations, residual)``.
    """
    psi = ex.parse(psi)
    dpsi = ex.differentiate(psi, "z")
    rule = K.rule
    y = rule.nodes
    KW = K.weighted
    n = rule.n

    def F(v):
        p = np.broadcast_to(ex.evaluate(psi, {"y": y, "z": v}), (n,))
        return v - f.values - omega * KW @ p

    def rnorm(r):
        return float(np.max(np.abs(r)))

    phi = np.array(initial.values, dtype=float)
    try:
        r = F(phi)
    except ex.EvaluationError as err:
        raise NewtonDivergenceError(f"nonlinearity undefined at the initial iterate: {err}") from None
    res = rnorm(r)
    scale = lambda v: max(1.0, f.norm_sup(), float(np.max(np.abs(v))))  # noqa: E731
    it = 0
    polish = 0
    while True:
        converged = res <= tol * scale(phi)
        if converged and (polish >= 2 or res == 0.0):
            break
        if it >= maxiter:
            if converged:
                break
            raise NewtonDivergenceError(
                f"Newton did not converge in {maxiter} iterations (residual {res:.3e})")
        d1 = np.broadcast_to(ex.evaluate(dpsi, {"y": y, "z": phi}), (n,))
        J = np.eye(n) - omega * KW * d1[None, :]
        # a singular Jacobian (a continuum of solutions) gets the minimal-norm
        # step, which never drifts along the null direction
        if np.linalg.cond(J) > CONDITION_LIMIT:
            step = np.linalg.lstsq(J, -r, rcond=NULLSPACE_RTOL)[0]
        else:
            step = np.linalg.solve(J, -r)
        lam = 1.0
        accepted = False
        while lam >= 2.0**-30:
            trial = phi + lam * step
            try:
                rt = F(trial)
            except ex.EvaluationError:
                lam *= 0.5
                continue
            if rnorm(rt) < res:
                accepted = True
                break
            lam *= 0.5
        it += 1
        if not accepted:
            if converged:
                break
            raise NewtonDivergenceError(f"Newton line search failed (residual {res:.3e})")
        phi, r, res = trial, rt, rnorm(rt)
        if converged:
            polish += 1
    return GridFunction(rule, phi), it, res


def eigen_base(K: DiscreteKernel, omega: float, scale: float = 1.0,
               resonance_tol: float = 1e-8):
    """Nontrivial solution of ``phi = omega * K phi`` if one exists.

    The resonant eigenfunction (``omega*mu`` closest to 1) is scaled so that
    its Nystrom interpolant has unit sup norm on [0, 1], signed so that the
    first point attaining that sup (from the left) is positive, then
    multiplied by ``scale``.  Returns ``(phi, mu)`` or ``(zeros, None)`` when
    no mode is resonant.
    """
    rule = K.rule
    if K.is_symmetric(1e-12):
        es = eigendecompose(K)
        gap = np.abs(1.0 - omega * es.eigenvalues)
        j = int(np.argmin(gap))
        if gap[j] > resonance_tol:
            return GridFunction.zeros(rule), None
        mu = float(es.eigenvalues[j])
        v = es.vectors[:, j]
    else:
        A = np.eye(rule.n) - omega * K.weighted
        _, sig, Vt = np.linalg.svd(A)
        if sig[-1] > resonance_tol * sig[0]:
            return GridFunction.zeros(rule), None
        v = Vt[-1]
        mu = 1.0 / omega
    if K.expression is not None:
        xs = np.union1d(np.linspace(0.0, 1.0, 2001), rule.nodes)
        G = np.broadcast_to(ex.evaluate(K.expression, {"x": xs[:, None], "y": rule.nodes[None, :]}),
                            (xs.size, rule.n))
        profile = G @ (rule.weights * v) / mu
    else:
        profile = v
    peak = np.max(np.abs(profile))
    first = np.flatnonzero(np.abs(profile) >= peak * (1 - 1e-9))[0]
    sign = 1.0 if profile[first] > 0 else -1.0
    return GridFunction(rule, scale * sign * v / peak), mu


def _base_solution(dp: DiscreteProblem, initial: Optional[GridFunction]):
    K, omega = dp.kernel0, dp.omega
    f_zero = not np.any(dp.f.values)
    info = {}
    if dp.psi0_is_identity and f_zero and initial is None:
        phi, mu = eigen_base(K, omega, dp.base_scale)
        info["base"] = "eigenfunction" if mu is not None else "trivial"
        info["resonant_eigenvalue"] = mu
        return phi, info
    if initial is None:
        if f_zero:
            phi0, _ = eigen_base(K, omega, dp.base_scale)
            initial = phi0
        else:
            initial = dp.f
    phi, its, res = newton_hammerstein(K, omega, dp.f, dp.psi0, initial)
    info.update(base="newton", newton_iterations=its, newton_residual=res)
    return phi, info


# ----------------------------------------------------------------------------
# series coefficients

def _require_order(N):
    if isinstance(N, bool) or int(N) != N or N < 0:
        raise ValueError(f"order must be a non-negative integer, got {N!r}")
    return int(N)


def _radius(rho):
    if rho is None:
        return math.nan
    return math.inf if rho == 0 else 1.0 / rho


def linear_series_terms(p, N: int) -> SeriesSolution:
    """Coefficients of the linear kernel-perturbed equation.

    ``a_0 = R f`` and ``a_j = R (omega G1 a_{j-1})`` with ``R`` the resolvent
    of the (re-centred) unperturbed kernel.
    """
    N = _require_order(N)
    dp = as_discrete(p)
    if not dp.is_linear:
        raise ValueError("linear_series_terms needs psi0 = z and psi1 = 0")
    R = Resolvent(dp.kernel0, dp.omega)
    a = [R.solve(dp.f)]
    K1 = dp.K1
    if K1.is_zero():
        a.extend(GridFunction.zeros(dp.rule) for _ in range(N))
    else:
        KW1 = dp.omega * K1.weighted
        for _ in range(N):
            a.append(R.solve(GridFunction(dp.rule, KW1 @ a[-1].values)))
    rho = dp.rho()
    diag = {
        "path": "linear",
        "rho": rho,
        "condition": R.condition,
        "norms": [g.norm(dp.norm) for g in a],
    }
    return SeriesSolution(dp, dp.base_epsilon, a, _radius(rho), diag)


def hammerstein_series_terms(p, N: int, initial: Optional[GridFunction] = None) -> SeriesSolution:
    """Coefficients of the general (nonlinear) perturbed equation.

    The base ``a_0`` comes from damped Newton, or from the resonant
    eigenfunction for homogeneous equations with ``psi0 = z``.  At order
    ``nu`` the eps**nu coefficient of ``omega (G0 + eps G1)[psi0(phi) + eps
    psi1(phi)]`` is split into the part linear in ``a_nu`` -- giving the
    operator ``I - omega G0 diag(psi0'(a_0))`` -- and known lower-order
    terms obtained by series composition.  Resonant (singular) orders are
    solved with the minimal-norm Fredholm-alternative solve; an unsolvable
    order ends the series there and is recorded in ``failure``.
    """
    N = _require_order(N)
    dp = as_discrete(p)
    rule, omega = dp.rule, dp.omega
    y = rule.nodes
    a0, info = _base_solution(dp, initial)
    a = [a0]
    diag = {"path": "hammerstein", **info, "singular_orders": [], "obstructions": {}}

    t0 = TaylorCoefficients(dp.psi0, a0.values, y)
    t1 = TaylorCoefficients(dp.psi1, a0.values, y)
    psi1_zero = dp.psi1 == ex.ZERO
    K1_zero = dp.K1.is_zero()
    KW0 = omega * dp.kernel0.weighted
    KW1 = omega * dp.K1.weighted
    J = dp.kernel0.scale_columns(t0[1])
    try:
        resolvent = Resolvent(J, omega)
        diag["condition"] = resolvent.condition
    except CharacteristicValueError as err:
        resolvent = None
        diag["condition"] = err.condition

    pow0 = PowerTable((rule.n,))
    pow1 = PowerTable((rule.n,))
    u0 = [np.array(t0[0])]
    u1 = [np.zeros(rule.n) if psi1_zero else np.array(t1[0])]
    failure = failed = None
    floor = 1e-12 * max(1.0, a0.norm_l2())

    for nu in range(1, N + 1):
        # psi1 composition is needed one order behind
        if nu >= 2 and not psi1_zero:
            nl = pow1.nonlinear_part(nu - 1, t1)
            pow1.push(a[nu - 1].values)
            u1.append(nl + t1[1] * a[nu - 1].values)
        elif nu >= 2:
            u1.append(np.zeros(rule.n))
        nl0 = pow0.nonlinear_part(nu, t0)
        rhs = KW0 @ (nl0 + u1[nu - 1])
        if not K1_zero:
            rhs = rhs + KW1 @ (u0[nu - 1] + (u1[nu - 2] if nu >= 2 else 0.0))
        rhs = GridFunction(rule, rhs)
        if resolvent is not None:
            an = resolvent.solve(rhs)
        else:
            res = singular_solve(J, omega, rhs, tol=RESONANT_SOLVE_TOL, atol=floor)
            diag["singular_orders"].append(nu)
            diag["obstructions"][nu] = res.nullspace_residual
            if not res.solvable:
                err = ResonanceError(nu, res.nullspace_residual)
                failure, failed = str(err), nu
                break
            an = res.solution
        a.append(an)
        pow0.push(an.values)
        u0.append(nl0 + t0[1] * an.values)

    diag["norms"] = [g.norm(dp.norm) for g in a]
    diag["rho"] = dp.rho() if dp.is_linear else None
    sol = SeriesSolution(dp, dp.base_epsilon, a, math.nan, diag, failure, failed)
    D = sol.growth_constant()
    if dp.is_linear and diag["rho"] is not None:
        sol.radius_estimate = _radius(diag["rho"])
    else:
        sol.radius_estimate = math.inf if D == 0 else 1.0 / D
    diag["D"] = D
    return sol


def solve_series(p, N: int, initial: Optional[GridFunction] = None) -> SeriesSolution:
    """Dispatch to the linear recursion when it applies, else the general path."""
    dp = as_discrete(p)
    if dp.is_linear and initial is None:
        try:
            return linear_series_terms(dp, N)
        except CharacteristicValueError:
            if np.any(dp.f.values):
                raise
    return hammerstein_series_terms(dp, N, initial)


def evaluate_series(s: SeriesSolution, eps: float, M: Optional[int] = None) -> GridFunction:
    """Horner evaluation of ``sum_{j<=M} a_j (eps - eps_base)**j``.

    Emits :class:`OutsideRadiusWarning` when ``(eps - eps_base) * rho >= 1``.
    """
    M = s.truncation if M is None else _require_order(M)
    if M > s.truncation:
        raise ValueError(f"series only has {s.truncation} orders")
    d = float(eps) - s.base_epsilon
    if d < 0:
        raise ValueError("eps must not be below the base point of the series")
    rho = s.rho
    if rho is not None and d * rho >= 1:
        warnings.warn(
            f"eps offset {d:g} is outside the guaranteed radius 1/rho={1 / rho:g}",
            OutsideRadiusWarning, stacklevel=2)
    out = np.zeros(s.rule.n)
    for a in s.coefficients[M::-1]:
        out = out * d + a.values
    return GridFunction(s.rule, out)


def derivative_series_terms(p, s: SeriesSolution) -> SeriesSolution:
    """x-derivative coefficients of a linear series, by post-processing.

    ``d_j = f' [j = 0] + omega (dG0/dx a_j + dG1/dx a_{j-1})``; no solves.
    """
    dp = as_discrete(p if p is not None else s.problem, with_x_derivative=True)
    if not dp.is_linear:
        raise ValueError("derivative series are implemented for linear problems")
    if not dp.has_x_derivative:
        raise ValueError("problem was discretized without x-derivative matrices")
    dp = dp.at(s.base_epsilon)
    rule = dp.rule
    W = rule.weights
    D0 = dp.omega * dp.kernel0.dx * W[None, :]
    D1 = dp.omega * dp.K1.dx * W[None, :]
    fprime = np.broadcast_to(
        ex.evaluate(ex.differentiate(dp.spec.forcing, "x"), {"x": rule.nodes}), (rule.n,))
    out = []
    for j, a in enumerate(s.coefficients):
        v = D0 @ a.values
        if j == 0:
            v = v + fprime
        else:
            v = v + D1 @ s.coefficients[j - 1].values
        out.append(GridFunction(rule, v))
    diag = {"path": "derivative", "norms": [g.norm(dp.norm) for g in out]}
    return SeriesSolution(dp, s.base_epsilon, out, s.radius_estimate, diag)


def tail_bound(s: SeriesSolution, eps: float, bound=None, M: Optional[int] = None) -> float:
    """Geometric truncation bound ``||a_0|| (rho d)^(M+1) / (1 - rho d)``.

    ``bound`` is a :class:`BoundsReport`, a number ``rho``, or ``None`` to use
    the series' own ``rho``.  Returns ``math.inf`` when ``rho*d >= 1``.
    """
    M = s.truncation if M is None else M
    if bound is None:
        rho = s.rho
    elif isinstance(bound, (int, float)):
        rho = float(bound)
    else:
        rho = bound.rho
    if rho is None:
        return math.inf
    d = float(eps) - s.base_epsilon
    q = rho * d
    if q == 0:
        return 0.0
    if q >= 1:
        return math.inf
    return s.coefficients[0].norm(s.problem.norm) * q ** (M + 1) / (1.0 - q)

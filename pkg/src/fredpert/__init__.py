"""Perturbation series for kernel- and nonlinearity-perturbed integral equations.

The equation solved throughout is

    phi(x) = f(x) + omega * int_0^1 [G0(x,y) + eps G1(x,y)]
                                    [psi0(y, phi(y)) + eps psi1(y, phi(y))] dy

discretized by Nystrom quadrature on [0, 1].
"""

from .bounds import BoundsReport, admissible_region, build_report, discriminant, envelope, g_pm, rho_linear
from .continuation import (
    Partition,
    RadiusEstimate,
    continue_to,
    empirical_radius,
    partition_compare,
    uniform_variation,
    variation,
)
from .exceptions import (
    CharacteristicValueError,
    ConfigurationError,
    EvaluationError,
    ExpressionTooLarge,
    FredpertError,
    NewtonDivergenceError,
    NumericalFailure,
    ParseError,
    ResonanceError,
)
from .expr import differentiate, evaluate, parse
from .faa_di_bruno import CoeffSeries, bell_partial, cauchy_product, compose_series, count_E, p_nu
from .linear_solver import (
    eigendecompose,
    singular_solve,
    solve_fredholm2,
    spectral_resolvent_solve,
)
from .operators import DiscreteKernel, GridFunction, apply_kernel, discretize_kernel, kernel_norms
from .oracle import direct_solve_at, fd_coefficients, separable_closed_form
from .quadrature import QuadratureRule, build_rule, integrate
from .series_engine import (
    DiscreteProblem,
    ProblemSpec,
    SeriesSolution,
    derivative_series_terms,
    evaluate_series,
    hammerstein_series_terms,
    linear_series_terms,
    solve_series,
    tail_bound,
)

__version__ = "0.1.0"

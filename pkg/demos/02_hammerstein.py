"""Series for a nonlinear (Hammerstein) equation.

    phi(x) = 1 + 0.25 * int_0^1 (x*y + eps*(x + y)) [phi(y)^2 + eps*sin(phi(y))] dy

The unperturbed solution is 1 + c x with c the smaller root of a scalar
quadratic.  Each higher coefficient solves a linear equation whose operator is
the derivative of the base problem; the right-hand side collects products of
lower orders.  We compare those coefficients with finite differences of
direct nonlinear solves and watch the series lose accuracy near a fold of the
solution branch.

Run:  python3 demos/02_hammerstein.py
"""

import math

import numpy as np

from fredpert import catalog
from fredpert.continuation import continue_to, empirical_radius
from fredpert.oracle import direct_solve_at, fd_coefficients
from fredpert.series_engine import hammerstein_series_terms

problem = catalog.load("hammerstein_quadratic")
series = hammerstein_series_terms(problem, 30)
x = series.rule.nodes
c = 8 * (5 / 6 - math.sqrt(25 / 36 - 1 / 32))
base_err = np.max(np.abs(series.coefficients[0].values - (1 + c * x)))
print(f"Base solution 1 + c x with c = {c:.8f}; grid error {base_err:.1e}")

print("\nCoefficients vs finite differences of direct solves (relative sup error):")
for k in range(1, 5):
    ref = fd_coefficients(problem, k)
    rel = np.max(np.abs(series.coefficients[k].values - ref.values)) / ref.norm_sup()
    print(f"  order {k}:  ||a_k|| = {series.coefficients[k].norm_sup():.4e}   rel. diff {rel:.1e}")

radius = empirical_radius(problem, series)
print(f"\nEmpirical radius {radius.radius:.4f}; growth constant D = {series.diagnostics['D']:.4f}")
print("Series vs direct solve:")
for eps in (0.1, 0.3, 0.5):
    direct = direct_solve_at(problem, eps)
    err = np.max(np.abs(series(eps).values - direct.values)) if eps < radius.radius else math.nan
    print(f"  eps = {eps:.1f}   sup error {err:.2e}")

walk = continue_to(problem, 1.0)
print(f"\nRe-expanding step by step stalls at eps = {walk.reached_epsilon:.6f} "
      f"({walk.status}, {len(walk.partition)} base points):")
print("the solution branch folds there, so no continuation past it exists.")

"""A homogeneous equation at a characteristic value.

    phi(x) = 2 * int_0^1 cos(pi x) cos(pi y) [phi(y) + eps * Psi(phi(y))] dy

At eps = 0 every multiple of cos(pi x) solves the equation, and the linear
operator of each higher order is singular.  A coefficient exists only when its
right-hand side is orthogonal to cos(pi x).

* Psi(z) = z^2: the integral of cos^3 vanishes, every condition holds and
  cos(pi x) solves the equation for every eps.
* Psi(z) = z^3: the integral of cos^4 does not vanish; order one is
  unsolvable and the series stops there.

Run:  python3 demos/03_resonance.py
"""

import numpy as np

from fredpert import catalog
from fredpert.oracle import direct_solve_at
from fredpert.series_engine import solve_series

quadratic = catalog.load("resonant_cos")
s = solve_series(quadratic, 10)
x = s.rule.nodes
print("Quadratic perturbation")
print(f"  base solution error vs cos(pi x): {np.max(np.abs(s.coefficients[0].values - np.cos(np.pi * x))):.1e}")
print(f"  largest |a_j|, j = 1..10:          {max(a.norm_sup() for a in s.coefficients[1:]):.1e}")
print(f"  singular orders solved:            {s.diagnostics['singular_orders']}")
phi = direct_solve_at(quadratic, 0.2)
print(f"  direct solve at eps = 0.2 vs cos:  {np.max(np.abs(phi.values - np.cos(np.pi * x))):.1e}")

cubic = catalog.load("resonant_cubic")
s = solve_series(cubic, 5)
print("\nCubic perturbation")
print(f"  series stopped after order {s.truncation}: {s.failure}")
print(f"  size of the violated condition: {s.diagnostics['obstructions'][s.failed_order]:.4f}")
print("  (the command-line tool exits with status 3 in this case)")

"""Extending a solution beyond one radius of convergence, and the variation
functional used to order partitions of the perturbation axis.

A series about eps = 0 converges only up to the nearest singularity.  By
re-expanding about points inside the disc we walk along the axis; the walk
reaches any point before a true singularity and collapses in front of it.

Run:  python3 demos/04_continuation.py
"""

import numpy as np

from fredpert import catalog
from fredpert.continuation import continue_to, partition_compare, uniform_variation, Partition

problem = catalog.load("t1_separable")

res = continue_to(problem, 3.0)
x = res.solution.rule.nodes
print("Walk to eps = 3 (exact solution 12 x):")
for step in res.steps:
    print(f"  base {step.base:.4f}   radius {step.radius:.4f}   step {step.step:.4f}")
print(f"  status {res.status}; error vs 12 x: {np.max(np.abs(res.solution.values - 12 * x)):.1e}")

res = continue_to(problem, 4.0)
print(f"\nWalk to eps = 4 stops at {res.reached_epsilon:.8f} ({res.status});")
print(f"the pole is at {10 / 3:.8f}.  Base points used: {len(res.partition)}")

print("\nVariation of sin(2 pi x) on uniform grids (limit: integral of |f'| = 4):")
for n in (6, 10, 18, 34, 66):
    print(f"  n = {n:3d}   V = {uniform_variation('sin(2*pi*x)', n):.6f}")

P = Partition((0.0, 0.25, 0.75, 1.0))
Q = Partition((0.0, 0.5, 1.0))
order = {-1: "precedes", 0: "ties with", 1: "follows"}[partition_compare(P, Q, "sin(2*pi*x)")]
print(f"\nWith equal spans, {P.points} {order} {Q.points}: larger variation ranks first.")

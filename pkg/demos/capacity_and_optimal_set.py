"""
Capacity and the set of optimal inputs
======================================

A channel with two identical rows has a whole segment of capacity-achieving
inputs. The solver returns that segment as a polytope, together with the
unique optimal output distribution.
"""

import numpy as np

from caidgeo.capacity import solve_capacity, verify_solution

W = np.array([
    [0.8, 0.1, 0.1],
    [0.1, 0.8, 0.1],
    [0.8, 0.1, 0.1],  # same as row 0
])
sol = solve_capacity(W)
print(f"capacity      {sol.capacity:.12f} nats")
print(f"output        {np.round(sol.center, 6)}")

# every vertex of the optimal set reaches the capacity and produces the same output
for v in sol.caid_polytope.vertices:
    print("vertex", np.round(sol.lift(v), 6))
print(verify_solution(sol))

# inputs 0 and 2 can trade mass freely: the affine hull of the optimal set has dimension 1
print("tangent dimension", sol.tangent.dim)

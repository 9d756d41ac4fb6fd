"""
Certifying the decay bounds on a random instance
================================================

Draw a channel and a polyhedral constraint, compute both families of decay
constants, and test the bounds on points sampled near the optimal set. An
inflated constant should break the first bound, and dropping the cubic slack
should break the second.
"""

from caidgeo.capacity import solve_capacity
from caidgeo.certify import certify_theorem1, certify_theorem2, random_instance, sample_neighborhood
from caidgeo.constants import decay_report

W, lam = random_instance(2)
sol = solve_capacity(W, lam)
rep = decay_report(sol)
t1, t2 = rep.theorem1, rep.theorem2
print(f"C = {sol.capacity:.8f} on {W.shape[0]} inputs, {len(sol.caid_polytope.vertices)} optimal vertices")
print(f"beta {t1.beta:.4f}  Gamma {t1.gamma:.4e}  delta {t1.delta:.4e}")
print(f"Gamma1 {t2.gamma1:.3e}  Gamma2 {t2.gamma2}  delta {t2.delta}  A {t2.a_coeff:.4f}")

S = sample_neighborhood(lam, sol, t1.delta, 4000, seed=0)
c = certify_theorem1(W, lam, sol, t1, S)
print(f"bound 1: {c.samples} samples, {c.violations} violations, worst margin {c.worst_margin:.2e}")
# the bound is not tight everywhere, so on some instances even 10x slips through
inflated = type(t1)(t1.beta, 10 * t1.gamma, t1.delta, t1.records)
print("bound 1 with Gamma x 10:", certify_theorem1(W, lam, sol, inflated, S).violations, "violations")

if t2.quadratic_branch:
    S2 = sample_neighborhood(lam, sol, t2.delta, 4000, seed=1)
    print("bound 2:", certify_theorem2(W, lam, sol, t2, S2).violations, "violations")
    print("bound 2 without cubic slack:", certify_theorem2(W, lam, sol, t2, S2, cubic_scale=0.0).violations,
          "violations")

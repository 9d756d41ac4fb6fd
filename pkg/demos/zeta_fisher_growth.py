"""
A channel whose Fisher diagonal is infinite
===========================================

Input 0 of the zeta channel spreads over negative outputs like 1/y^2, while
the optimal output decays like 1/y^3 there. The capacity is still finite and
has a closed form, but the Fisher diagonal keeps growing with the output
truncation, roughly like its logarithm.
"""


from caidgeo.certify import example3_zeta

rep = example3_zeta(64, (100, 1000, 10000))
print(f"threshold on n: {rep.threshold:.4f}; using n = {rep.n}")
for T, c, err, s in zip(rep.truncations, rep.capacities, rep.capacity_errors, rep.sigma00):
    print(f"T = {T:6d}  C = {c:.12f}  |C - ln sqrt(n-1)| = {err:.1e}  Sigma(0,0) = {s:.4f}")
print("successive ratios", [round(r, 4) for r in rep.ratios])
print("increment per decade of truncation", [round(b - a, 4) for a, b in zip(rep.sigma00, rep.sigma00[1:])])

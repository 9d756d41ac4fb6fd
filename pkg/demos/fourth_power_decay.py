"""
Fourth-power decay on a curved constraint
=========================================

Three inputs, two outputs, and a ball constraint touching the optimum. Along
the ball boundary the information gap shrinks like the fourth power of the
distance, so no quadratic lower bound can hold there. Polygons inscribed in
the ball recover a quadratic bound whose constant vanishes as the polygon
gets finer.
"""

from caidgeo.certify import example1_fourth_power, example1_polygon_sweep, quadratic_bound_witness

limit, rep = example1_fourth_power((0.2, 0.1, 0.05))
for t, d, g, r in zip(rep.taus, rep.distances, rep.gaps, rep.ratios):
    print(f"tau {t:5.2f}  distance {d:.3e}  gap {g:.3e}  gap/d^4 {r:.6f}")
print(f"extrapolated limit {limit:.6f}, fitted exponent {rep.fitted_exponent:.4f}")

# for any quadratic constant and radius there is a boundary point beating it
tau, d, gap = quadratic_bound_witness(1e-3, 1e-2)
print(f"gap {gap:.2e} < 1e-3 * d^2 = {1e-3 * d ** 2:.2e} at tau = {tau:.4f}")

print("\n  k    Gamma (thm 1)   Gamma2 (thm 2)")
for row in example1_polygon_sweep((6, 12, 24, 48)):
    print(f"{row['k']:3d}   {row['gamma']:.4e}     {row['gamma2']:.4e}")

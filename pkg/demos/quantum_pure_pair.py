"""
Classical-quantum channels
==========================

Two non-orthogonal pure states on a qubit, then a commuting channel that
reduces exactly to a classical one. The same solver and the same constants
apply once the channel is wrapped as a quantum model.
"""

import numpy as np

from caidgeo import corpus
from caidgeo.capacity import solve_capacity
from caidgeo.constants import decay_report
from caidgeo.quantum import q_capacity_and_theorems

inst = corpus.pure_pair_channel(np.pi / 3)
qr = q_capacity_and_theorems(inst.channel)
print(f"pure pair: C = {qr.solution.capacity:.10f}, optimal input {np.round(qr.solution.maximizer, 6)}")
print("Fisher matrix (BKM)\n", np.round(qr.fisher, 6))
print(f"A = {qr.a_coeff:.6f}")

inst = corpus.commuting_cq_channel()
qr = q_capacity_and_theorems(inst.channel)
cl = decay_report(solve_capacity(inst.channel.classical_reduction()))
print(f"commuting: quantum C = {qr.solution.capacity:.12f}, classical C = {cl.solution.capacity:.12f}")
print(f"Gamma (quantum) {qr.theorem1.gamma:.10e}, Gamma (classical) {cl.theorem1.gamma:.10e}")
